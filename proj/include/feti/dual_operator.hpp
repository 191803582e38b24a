#pragma once

#include "feti/cholesky.hpp"
#include "feti/common.hpp"
#include "feti/pool.hpp"
#include "feti/problem.hpp"
#include "feti/sparse.hpp"

#include <atomic>
#include <exception>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace feti {

/// Strategy plus the explicit-assembly parameter space. The SYRK path ignores
/// the backward_* fields; the implicit strategy always uses the sparse factor
/// (only the orders apply); schur_oracle ignores every kernel field.
struct DualOpConfig {
    Strategy strategy = Strategy::implicit;
    Path path = Path::trsm;
    Storage forward_storage = Storage::sparse;
    Storage backward_storage = Storage::sparse;
    Order forward_order = Order::row;
    Order backward_order = Order::row;
    Order rhs_order = Order::col;
    Staging staging = Staging::cluster_wide;

    Execution execution = Execution::openmp;
    int threads = 0;               ///< 0: OpenMP default
    std::size_t pool_bytes = 0;    ///< total budget (persistent + temporary); 0: sized automatically
    Index schur_dense_cap = 2000;  ///< largest subdomain the Schur oracle accepts

    bool operator==(const DualOpConfig&) const = default;
};

std::string describe(const DualOpConfig& config);

/// Every storage/order combination of one explicit path (32 for TRSM, 8 for SYRK).
std::vector<DualOpConfig> explicit_grid(Path path, const DualOpConfig& base = {});
/// Implicit baseline followed by both explicit paths, each under both staging modes.
std::vector<DualOpConfig> full_grid(const DualOpConfig& base = {});

/// B with columns renumbered by `iperm` (old -> new), rows unchanged.
SparseCsr permute_columns(const SparseCsr& b, std::span<const Index> iperm);

/// F_i = B K_reg^{-1} B^T through the configured path. `b` is in original DOF order;
/// the factor permutation is applied while densifying B^T. Returns both triangles.
DenseMat assemble_explicit_local(const CholFactor& factor, const SparseCsr& b, const DualOpConfig& config);

/// q = B U^{-1} U^{-T} B^T p with sparse products and single-vector solves.
std::vector<double> apply_implicit_local(const CholFactor& factor, const SparseCsr& b, std::span<const double> p,
                                         Order forward_order = Order::row, Order backward_order = Order::row);

/// Negated Schur complement of [[K_reg, B^T], [B, 0]] by dense block elimination.
DenseMat schur_complement_oracle(const SparseCsr& k_reg, const SparseCsr& b, Index dense_cap = 2000);

/// Per-subdomain dual operator state for a whole problem: prepare once, then
/// preprocess after every value change and apply during the iterations.
class DualOperator {
public:
    DualOperator(const FetiProblem& problem, DualOpConfig config);
    ~DualOperator();
    DualOperator(const DualOperator&) = delete;
    DualOperator& operator=(const DualOperator&) = delete;

    const DualOpConfig& config() const { return config_; }
    const FetiProblem& problem() const { return problem_; }

    void prepare();
    void preprocess();

    /// q = F p over global dual vectors (sum over clusters).
    void apply(std::span<const double> p, std::span<double> q);
    /// q_c = sum_i gather_i(F_i scatter_i(p_c)) on one cluster's dual vector.
    void apply_cluster(Index cluster, std::span<const double> p, std::span<double> q);
    /// q_i = F_i p_i for a single subdomain (subdomain-local dual vectors).
    void apply_local(Index subdomain, std::span<const double> p, std::span<double> q);

    /// x = K_reg^{-1} b for subdomain i (a generalized inverse of K_i).
    void solve_primal(Index subdomain, std::span<const double> b, std::span<double> x);

    /// Explicit F_i with both triangles (explicit and Schur strategies only).
    DenseMat local_operator(Index subdomain) const;
    const CholFactor& factor(Index subdomain) const;
    const SparseCsr& regularized_pattern(Index subdomain) const;
    std::span<const double> regularized_values(Index subdomain) const;
    std::span<const double> explicit_storage(Index subdomain) const;

    long symbolic_count() const { return symbolic_calls_.load(); }
    long numeric_count() const { return numeric_calls_.load(); }
    bool prepared() const { return stage_ >= Stage::prepared; }
    bool ready() const;

    std::size_t persistent_bytes() const { return persistent_bytes_; }
    std::size_t temporary_bytes_needed(Index subdomain) const;
    Pool& pool() { return *pool_; }

private:
    enum class Stage { created, prepared, preprocessed };
    struct Local;
    struct ClusterBuffers {
        std::vector<double> p;
        std::vector<double> q;
    };

    void check_ready() const;
    void preprocess_subdomain(Index i);
    template <typename Body>
    void for_each_subdomain(std::span<const Index> subdomains, Body&& body);
    int worker_count() const;

    const FetiProblem& problem_;
    DualOpConfig config_;
    Stage stage_ = Stage::created;
    std::uint64_t version_ = 0;
    std::vector<std::unique_ptr<Local>> locals_;
    std::vector<ClusterBuffers> clusters_;
    std::vector<Index> all_subdomains_;
    std::vector<std::exception_ptr> errors_;
    std::unique_ptr<Pool> pool_;
    std::size_t persistent_bytes_ = 0;
    std::atomic<long> symbolic_calls_{0};
    std::atomic<long> numeric_calls_{0};
};

} // namespace feti
