#pragma once

#include "feti/common.hpp"
#include "feti/dual_operator.hpp"
#include "feti/problem.hpp"
#include "feti/sparse.hpp"

#include <functional>
#include <span>
#include <vector>

namespace feti {

/// Orthonormal basis of the rigid modes of a floating subdomain: the constant
/// for heat, translations and rotations for elasticity. When `k` is given the
/// basis is verified against it (||K R|| <= 1e-10 ||K||).
DenseMat build_kernel(Physics physics, const Mesh& mesh, const SparseCsr* k = nullptr);

struct DualSystem {
    DenseMat g;                         ///< multipliers x total kernel dimension, column-major
    std::vector<double> e;              ///< R^T f
    std::vector<double> d;              ///< B K^+ f - c
    std::vector<Index> kernel_offsets;  ///< first column of each subdomain in G
    DenseCholesky gtg;

    Index multipliers() const { return g.rows(); }
    Index coarse_size() const { return g.cols(); }
};

/// Needs a preprocessed operator (K^+ is taken from its factors).
DualSystem assemble_dual_system(const FetiProblem& problem, DualOperator& op);

/// y = G^T x
void apply_gt(const DualSystem& sys, std::span<const double> x, std::span<double> y);
/// out = P x = x - G (G^T G)^{-1} G^T x. `out` may alias `x`.
void project(const DualSystem& sys, std::span<const double> x, std::span<double> out);
std::vector<double> project(const DualSystem& sys, std::span<const double> x);

enum class Preconditioner { none, lumped };

/// y = M w. Lumped: sum over subdomains of B_i K_i B_i^T on the local slices.
void apply_preconditioner(Preconditioner kind, const FetiProblem& problem, std::span<const double> w,
                          std::span<double> y);

struct PcpgConfig {
    double tol = 1e-9;
    int maxit = 1000;
    Preconditioner precond = Preconditioner::none;
    int record_iterates = 0;  ///< keep lambda_0 .. lambda_{record_iterates}
};

struct PcpgResult {
    std::vector<double> lambda;
    int iterations = 0;
    double initial_norm = 0.0;               ///< ||w_0||
    std::vector<double> history;             ///< ||w_k||, length iterations + 1
    std::vector<double> feasibility;         ///< ||G^T lambda_k - e|| per iterate
    std::vector<std::vector<double>> iterates;
    double apply_seconds = 0.0;              ///< total time spent in F applications
    int applies = 0;

    double relative_residual() const { return initial_norm > 0.0 ? history.back() / initial_norm : 0.0; }
};

/// Preconditioned conjugate projected gradient from the feasible start
/// lambda_I = G (G^T G)^{-1} e. Throws SolverError on breakdown or maxit.
PcpgResult pcpg(const DualSystem& sys, DualOperator& op, const PcpgConfig& config);

struct Solution {
    std::vector<double> alpha;
    std::vector<std::vector<double>> u;  ///< per subdomain
    double constraint_residual = 0.0;    ///< ||B u - c||
    double constraint_bound = 0.0;
    double primal_residual = 0.0;        ///< ||K u + B^T lambda - f||
    double primal_bound = 0.0;
};

/// alpha = -(G^T G)^{-1} G^T (d - F lambda), u_i = K_i^+ (f_i - B_i^T lambda_i) + R_i alpha_i.
/// Throws SolverError when a residual exceeds its bound.
Solution recover_solution(const FetiProblem& problem, DualOperator& op, const DualSystem& sys,
                          std::span<const double> lambda, double tol, double initial_norm);

struct StepReport {
    int step = 0;
    double coefficient = 1.0;
    double t_preprocess_ms = 0.0;
    int iterations = 0;
    double t_apply_ms = 0.0;  ///< mean per F application
    double residual = 0.0;    ///< ||w_k|| / ||w_0||
    double constraint_residual = 0.0;
    double primal_residual = 0.0;
    double u_norm = 0.0;
    double lambda_norm = 0.0;
};

struct StepRun {
    std::vector<StepReport> reports;
    std::vector<double> lambda;  ///< last step
    Solution solution;           ///< last step
    long symbolic_count = 0;
    long numeric_count = 0;
};

/// Called right before and right after every preprocess (`after` = false/true).
using PreprocessHook = std::function<void(int step, bool after)>;

/// Prepares once, then per step: new coefficient, preprocess, dual system, PCPG, recovery.
StepRun run_steps(FetiProblem& problem, int n_steps, const std::function<double(int)>& coefficient,
                  const DualOpConfig& op_config, const PcpgConfig& pcpg_config, const PreprocessHook& hook = {});

} // namespace feti
