#pragma once

#include "feti/dual_operator.hpp"
#include "feti/feti_solver.hpp"
#include "feti/problem.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace feti {

struct ExperimentConfig {
    ProblemSpec problem;
    std::vector<DualOpConfig> grid;
    PcpgConfig pcpg;
    int repetitions = 1;
    int steps = 1;                 ///< time steps per solve; coefficients after the first are drawn from `seed`
    std::size_t pool_bytes = 0;
    std::uint64_t seed = 0;
    double verify_tol = 1e-6;      ///< relative error allowed against the direct solve
};

struct Measurement {
    std::size_t config_index = 0;
    int rep = 0;
    bool ok = false;
    std::string error;
    double t_preprocess_ms = 0.0;  ///< mean over steps
    double t_apply_ms = 0.0;       ///< mean per F application
    int iterations = 0;
    double residual = 0.0;         ///< relative projected residual of the last step
    double error_vs_direct = 0.0;
};

struct Timing {
    double t_preprocess = 0.0;
    double t_apply = 0.0;
};

struct ConfigSummary {
    bool ok = false;
    Timing median;
    int iterations = 0;
};

struct MeasurementSet {
    std::vector<DualOpConfig> grid;
    std::vector<Measurement> rows;       ///< sorted by (config index, repetition)
    std::vector<ConfigSummary> summary;  ///< one per grid entry
    std::optional<ConfigSummary> implicit_baseline;
    Index dofs_per_subdomain = 0;
    Index subdomains = 0;
    ProblemSpec problem;

    /// Every successful grid point reached the same iteration count.
    bool iterations_consistent() const;
};

/// Sparse direct solve of the global system with Dirichlet rows eliminated.
std::vector<double> solve_direct_sparse(const GlobalSystem& system);

MeasurementSet run_experiment(const ExperimentConfig& config);

/// Iterations after which the explicit operator has paid back its extra
/// preprocessing; 0 when it is never slower, nullopt ("never") when it never pays off.
std::optional<long long> amortization_point(Timing implicit, Timing explicit_op);
std::string format_amortization(std::optional<long long> n);

/// Problem consisting of one subdomain of `problem` with its local multipliers
/// (renumbered 0..m_i-1). Used for per-subdomain benchmarks.
FetiProblem extract_subdomain(const FetiProblem& problem, Index subdomain);
/// Subdomain with the most multipliers (lowest index on ties).
Index representative_subdomain(const FetiProblem& problem);

struct AutotuneOptions {
    int applies = 5;
    /// Replaces the measurement; receives the candidate and its grid index.
    std::function<Timing(const DualOpConfig&, std::size_t)> measure;
};

/// argmin over the grid of T_pre + k t_app, measured on the representative
/// subdomain; ties keep the earlier candidate.
DualOpConfig autotune(const FetiProblem& problem, std::span<const DualOpConfig> grid, double k,
                      const AutotuneOptions& options = {});

/// Times one prepare/preprocess and `applies` applications on `problem`.
Timing measure_config(const FetiProblem& problem, const DualOpConfig& config, int applies);

extern const char* const csv_header;
void write_csv(std::ostream& out, const MeasurementSet& set);

} // namespace feti
