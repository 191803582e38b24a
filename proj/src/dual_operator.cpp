#include "feti/dual_operator.hpp"

#include "feti/decomposition.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace feti {

std::string describe(const DualOpConfig& c)
{
    std::ostringstream os;
    os << to_string(c.strategy);
    if (c.strategy == Strategy::explicit_assembly) {
        os << '/' << to_string(c.path) << " fwd=" << to_string(c.forward_storage) << ',' << to_string(c.forward_order);
        if (c.path == Path::trsm) os << " bwd=" << to_string(c.backward_storage) << ',' << to_string(c.backward_order);
        os << " rhs=" << to_string(c.rhs_order);
    }
    os << " staging=" << to_string(c.staging);
    return os.str();
}

std::vector<DualOpConfig> explicit_grid(Path path, const DualOpConfig& base)
{
    std::vector<DualOpConfig> grid;
    const Storage storages[] = {Storage::sparse, Storage::dense};
    const Order orders[] = {Order::row, Order::col};
    for (Storage fs : storages)
        for (Storage bs : storages)
            for (Order fo : orders)
                for (Order bo : orders)
                    for (Order ro : orders) {
                        if (path == Path::syrk && (bs != Storage::sparse || bo != Order::row)) continue;
                        DualOpConfig c = base;
                        c.strategy = Strategy::explicit_assembly;
                        c.path = path;
                        c.forward_storage = fs;
                        c.backward_storage = bs;
                        c.forward_order = fo;
                        c.backward_order = bo;
                        c.rhs_order = ro;
                        grid.push_back(c);
                    }
    return grid;
}

std::vector<DualOpConfig> full_grid(const DualOpConfig& base)
{
    std::vector<DualOpConfig> grid;
    for (Staging staging : {Staging::per_subdomain, Staging::cluster_wide}) {
        DualOpConfig implicit = base;
        implicit.strategy = Strategy::implicit;
        implicit.staging = staging;
        grid.push_back(implicit);
    }
    for (Path path : {Path::trsm, Path::syrk})
        for (Staging staging : {Staging::per_subdomain, Staging::cluster_wide}) {
            DualOpConfig b = base;
            b.staging = staging;
            for (const DualOpConfig& c : explicit_grid(path, b)) grid.push_back(c);
        }
    return grid;
}

SparseCsr permute_columns(const SparseCsr& b, std::span<const Index> iperm)
{
    const SparseCsr rows = b.with_orientation(Order::row);
    if (static_cast<Index>(iperm.size()) != rows.cols()) throw InvalidArgument("permute_columns: permutation size mismatch");
    std::vector<Index> offsets(rows.offsets().begin(), rows.offsets().end());
    std::vector<Index> indices(rows.nnz());
    std::vector<double> values(rows.nnz());
    std::vector<std::pair<Index, double>> line;
    for (Index r = 0; r < rows.rows(); ++r) {
        line.clear();
        for (Index p = offsets[r]; p < offsets[r + 1]; ++p) line.emplace_back(iperm[rows.indices()[p]], rows.values()[p]);
        std::sort(line.begin(), line.end());
        for (Index p = offsets[r], t = 0; p < offsets[r + 1]; ++p, ++t) {
            indices[p] = line[t].first;
            values[p] = line[t].second;
        }
    }
    return SparseCsr(rows.rows(), rows.cols(), std::move(offsets), std::move(indices), std::move(values));
}

namespace {

constexpr std::size_t alignment = 64;

std::size_t aligned_doubles(std::size_t count)
{
    return (count * sizeof(double) + alignment - 1) / alignment * alignment;
}

struct ExplicitBuffers {
    std::span<double> rhs;      // n x m
    std::span<double> forward;  // n x n when the forward factor is dense
    std::span<double> backward; // n x n when the backward factor is dense and not shared
};

struct ExplicitSizes {
    std::size_t rhs = 0, forward = 0, backward = 0;
    std::size_t bytes() const { return aligned_doubles(rhs) + aligned_doubles(forward) + aligned_doubles(backward); }
};

bool backward_shares_forward(const DualOpConfig& c)
{
    return c.forward_storage == Storage::dense && c.backward_storage == Storage::dense && c.forward_order == c.backward_order;
}

ExplicitSizes explicit_sizes(const DualOpConfig& c, std::size_t n, std::size_t m)
{
    ExplicitSizes s;
    s.rhs = n * m;
    if (c.forward_storage == Storage::dense) s.forward = n * n;
    if (c.path == Path::trsm && c.backward_storage == Storage::dense && !backward_shares_forward(c)) s.backward = n * n;
    return s;
}

UpperFactorView factor_view(const CholFactor& f, Storage storage, Order order, std::span<double> dense_buffer, bool convert)
{
    if (storage == Storage::sparse) return sparse_view(f, order);
    if (convert) factor_to_dense(f, order, dense_buffer);
    return dense_view(dense_buffer, f.size(), order);
}

// Writes the full m x m product (TRSM) or its upper triangle (SYRK) into `out`.
void assemble_explicit_into(const CholFactor& factor, const SparseCsr& b_perm, const DualOpConfig& config,
                            const ExplicitBuffers& buf, DenseView out)
{
    const Index n = factor.size();
    const Index m = b_perm.rows();
    if (b_perm.cols() != n) throw InvalidArgument("assemble_explicit_local: B columns do not match the factor size");
    if (out.rows != m || out.cols != m) throw InvalidArgument("assemble_explicit_local: output shape mismatch");

    DenseView x{buf.rhs.data(), n, m, config.rhs_order};
    std::fill(buf.rhs.begin(), buf.rhs.end(), 0.0);
    const auto off = b_perm.offsets();
    const auto idx = b_perm.indices();
    const auto val = b_perm.values();
    for (Index r = 0; r < m; ++r)
        for (Index p = off[r]; p < off[r + 1]; ++p) x(idx[p], r) = val[p];

    const UpperFactorView forward = factor_view(factor, config.forward_storage, config.forward_order, buf.forward, true);
    trsm_in_place(forward, x, Transpose::yes);

    if (config.path == Path::syrk) {
        syrk_upper(ConstDenseView{x.data, x.rows, x.cols, x.order}, out);
        return;
    }
    UpperFactorView backward;
    if (backward_shares_forward(config)) backward = forward;
    else backward = factor_view(factor, config.backward_storage, config.backward_order, buf.backward, true);
    trsm_in_place(backward, x, Transpose::no);
    sparse_dense_multiply(b_perm, ConstDenseView{x.data, x.rows, x.cols, x.order}, out);
}

void implicit_apply_into(const CholFactor& factor, const SparseCsr& b_perm, Order forward_order, Order backward_order,
                         std::span<const double> p, std::span<double> q, std::span<double> work)
{
    sparse_apply(b_perm, p, work, Transpose::yes);
    trsv_in_place(sparse_view(factor, forward_order), work, Transpose::yes);
    trsv_in_place(sparse_view(factor, backward_order), work, Transpose::no);
    sparse_apply(b_perm, work, q, Transpose::no);
}

std::size_t schur_doubles(std::size_t n, std::size_t m)
{
    return (n + m) * (n + m);
}

// Dense elimination of the K block of the augmented saddle-point matrix. The
// bottom-right block of `aug` ends up holding -B K^{-1} B^T (upper triangle).
void schur_into(const SparseCsr& k_reg, std::span<const double> k_values, const SparseCsr& b, std::span<double> aug,
                DenseView out)
{
    const Index n = k_reg.rows();
    const Index m = b.rows();
    const std::size_t dim = static_cast<std::size_t>(n + m);
    if (b.cols() != n) throw InvalidArgument("schur_complement_oracle: B columns do not match K");
    if (aug.size() != dim * dim) throw InvalidArgument("schur_complement_oracle: workspace size mismatch");
    std::fill(aug.begin(), aug.end(), 0.0);
    const auto koff = k_reg.offsets();
    const auto kidx = k_reg.indices();
    for (Index i = 0; i < n; ++i)
        for (Index p = koff[i]; p < koff[i + 1]; ++p) aug[i * dim + kidx[p]] = k_values[p];
    const SparseCsr br = b.with_orientation(Order::row);
    for (Index r = 0; r < m; ++r)
        for (Index p = br.offsets()[r]; p < br.offsets()[r + 1]; ++p) {
            const std::size_t c = static_cast<std::size_t>(br.indices()[p]);
            aug[c * dim + n + r] = br.values()[p];
            aug[(n + r) * dim + c] = br.values()[p];
        }
    for (Index k = 0; k < n; ++k) {
        double* rk = aug.data() + k * dim;
        if (!(rk[k] > 0.0)) throw NotSpdError("schur_complement_oracle: K_reg is not SPD", k);
        const double d = std::sqrt(rk[k]);
        rk[k] = d;
        for (std::size_t j = k + 1; j < dim; ++j) rk[j] /= d;
        for (std::size_t i = k + 1; i < dim; ++i) {
            const double a = rk[i];
            if (a == 0.0) continue;
            double* ri = aug.data() + i * dim;
            for (std::size_t j = i; j < dim; ++j) ri[j] -= a * rk[j];
        }
    }
    for (Index i = 0; i < m; ++i)
        for (Index j = i; j < m; ++j) out(i, j) = -aug[(n + i) * dim + n + j];
}

void mirror_upper(DenseMat& f)
{
    for (Index i = 0; i < f.rows(); ++i)
        for (Index j = 0; j < i; ++j) f(i, j) = f(j, i);
}

} // namespace

DenseMat assemble_explicit_local(const CholFactor& factor, const SparseCsr& b, const DualOpConfig& config)
{
    const SparseCsr b_perm = permute_columns(b, factor.symbolic().iperm);
    const std::size_t n = static_cast<std::size_t>(factor.size());
    const std::size_t m = static_cast<std::size_t>(b.rows());
    const ExplicitSizes sizes = explicit_sizes(config, n, m);
    std::vector<double> rhs(sizes.rhs), fwd(sizes.forward), bwd(sizes.backward);
    DenseMat f(b.rows(), b.rows(), Order::row);
    assemble_explicit_into(factor, b_perm, config, {rhs, fwd, bwd}, f.view());
    if (config.path == Path::syrk) mirror_upper(f);
    return f;
}

std::vector<double> apply_implicit_local(const CholFactor& factor, const SparseCsr& b, std::span<const double> p,
                                         Order forward_order, Order backward_order)
{
    if (static_cast<Index>(p.size()) != b.rows() || b.cols() != factor.size())
        throw InvalidArgument("apply_implicit_local: shape mismatch");
    const SparseCsr b_perm = permute_columns(b, factor.symbolic().iperm);
    std::vector<double> q(p.size()), work(static_cast<std::size_t>(factor.size()));
    implicit_apply_into(factor, b_perm, forward_order, backward_order, p, q, work);
    return q;
}

DenseMat schur_complement_oracle(const SparseCsr& k_reg, const SparseCsr& b, Index dense_cap)
{
    if (k_reg.rows() > dense_cap)
        throw InvalidArgument("schur_complement_oracle: subdomain of " + std::to_string(k_reg.rows()) +
                              " DOFs exceeds the dense cap of " + std::to_string(dense_cap));
    const SparseCsr k = k_reg.with_orientation(Order::row);
    std::vector<double> aug(schur_doubles(static_cast<std::size_t>(k.rows()), static_cast<std::size_t>(b.rows())));
    DenseMat f(b.rows(), b.rows(), Order::row);
    schur_into(k, k.values(), b, aug, f.view());
    mirror_upper(f);
    return f;
}

struct DualOperator::Local {
    Index n = 0;
    Index m = 0;
    Regularization reg;
    std::vector<double> kreg_values;
    CholFactor factor;
    SparseCsr b_perm;
    std::vector<double> f;  // m x m row-major, upper triangle meaningful
    std::vector<double> p, q, work, primal_work;
    std::size_t temp_bytes = 0;
};

DualOperator::DualOperator(const FetiProblem& problem, DualOpConfig config) : problem_(problem), config_(config) {}

DualOperator::~DualOperator() = default;

int DualOperator::worker_count() const
{
    if (config_.execution == Execution::serial) return 1;
    return config_.threads > 0 ? config_.threads : omp_get_max_threads();
}

template <typename Body>
void DualOperator::for_each_subdomain(std::span<const Index> subdomains, Body&& body)
{
    const Index count = static_cast<Index>(subdomains.size());
    if (config_.execution == Execution::serial) {
        for (Index s : subdomains) body(s);
        return;
    }
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
    for (Index t = 0; t < count; ++t) {
        const Index s = subdomains[t];
        try {
            body(s);
        } catch (...) {
            errors_[s] = std::current_exception();
        }
    }
    for (Index s : subdomains) {
        if (errors_[s]) {
            std::exception_ptr e = errors_[s];
            for (auto& err : errors_) err = nullptr;
            std::rethrow_exception(e);
        }
    }
}

void DualOperator::prepare()
{
    if (stage_ != Stage::created) throw ContractViolation("DualOperator::prepare: already prepared");
    const Index count = problem_.subdomain_count();
    if (problem_.layout.cluster_count() == 0) throw InvalidArgument("DualOperator::prepare: problem has no cluster layout");
    errors_.assign(count, nullptr);
    locals_.clear();
    for (Index i = 0; i < count; ++i) locals_.push_back(std::make_unique<Local>());
    all_subdomains_.resize(count);
    std::iota(all_subdomains_.begin(), all_subdomains_.end(), 0);

    for_each_subdomain(all_subdomains_, [&](Index i) {
        const Subdomain& sd = problem_.subdomains[i];
        const SparseCsr& b = problem_.constraints.local_b[i];
        Local& l = *locals_[i];
        l.n = sd.dofs();
        l.m = b.rows();
        if (b.cols() != l.n) throw InvalidArgument("DualOperator::prepare: B columns do not match subdomain DOFs");
        if (config_.strategy == Strategy::schur_oracle && l.n > config_.schur_dense_cap)
            throw InvalidArgument("DualOperator::prepare: subdomain exceeds the Schur oracle dense cap");
        l.reg = make_regularization(sd.stiffness, sd.kernel, sd.fixing_dofs);
        auto symbolic = std::make_shared<const SymbolicFactor>(symbolic_factorize(l.reg.pattern));
        ++symbolic_calls_;
        l.kreg_values.assign(l.reg.pattern.nnz(), 0.0);
        l.factor = CholFactor(symbolic);
        l.b_perm = permute_columns(b, symbolic->iperm);
        if (config_.strategy != Strategy::implicit) l.f.assign(static_cast<std::size_t>(l.m) * l.m, 0.0);
        l.p.assign(l.m, 0.0);
        l.q.assign(l.m, 0.0);
        l.work.assign(l.n, 0.0);
        l.primal_work.assign(l.n, 0.0);
        if (config_.strategy == Strategy::explicit_assembly)
            l.temp_bytes = explicit_sizes(config_, l.n, l.m).bytes();
        else if (config_.strategy == Strategy::schur_oracle)
            l.temp_bytes = aligned_doubles(schur_doubles(l.n, l.m));
    });

    persistent_bytes_ = 0;
    for (const auto& lp : locals_) {
        const Local& l = *lp;
        const SymbolicFactor& s = l.factor.symbolic();
        const std::size_t ints = s.perm.size() * 3 + s.row_ptr.size() + s.col_idx.size() + s.csc_ptr.size() +
                                 s.csc_row.size() + s.csc_to_csr.size() + s.a_ptr.size() + s.a_row.size() + s.a_src.size() +
                                 static_cast<std::size_t>(l.reg.pattern.nnz() + l.reg.pattern.rows() + 1) +
                                 l.reg.from_k.size() + l.reg.block_pos.size() +
                                 static_cast<std::size_t>(l.b_perm.nnz() + l.b_perm.rows() + 1);
        const std::size_t doubles = l.kreg_values.size() + 2 * s.col_idx.size() + static_cast<std::size_t>(s.n) +
                                    static_cast<std::size_t>(l.b_perm.nnz()) + l.f.size() + l.p.size() + l.q.size() +
                                    l.work.size() + l.primal_work.size();
        persistent_bytes_ += ints * sizeof(Index) + doubles * sizeof(double);
    }
    clusters_.clear();
    for (Index c = 0; c < problem_.layout.cluster_count(); ++c) {
        const std::size_t size = problem_.layout.cluster_multipliers[c].size();
        clusters_.push_back({std::vector<double>(size, 0.0), std::vector<double>(size, 0.0)});
        persistent_bytes_ += 2 * size * sizeof(double);
    }

    std::vector<std::size_t> needs;
    for (const auto& lp : locals_) needs.push_back(lp->temp_bytes);
    const std::size_t largest = needs.empty() ? 0 : *std::max_element(needs.begin(), needs.end());
    std::size_t temporary = 0;
    if (config_.pool_bytes == 0) {
        std::sort(needs.rbegin(), needs.rend());
        const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), needs.size());
        for (std::size_t w = 0; w < workers; ++w) temporary += needs[w];
    } else {
        if (config_.pool_bytes < persistent_bytes_)
            throw InvalidArgument("DualOperator::prepare: pool of " + std::to_string(config_.pool_bytes) +
                                  " bytes cannot hold the persistent set of " + std::to_string(persistent_bytes_) + " bytes");
        temporary = config_.pool_bytes - persistent_bytes_;
        if (largest > temporary)
            throw InvalidArgument("DualOperator::prepare: temporary pool of " + std::to_string(temporary) +
                                  " bytes is smaller than one subdomain's workspace (" + std::to_string(largest) + " bytes)");
    }
    pool_ = std::make_unique<Pool>(temporary, alignment);
    stage_ = Stage::prepared;
}

void DualOperator::preprocess_subdomain(Index i)
{
    Local& l = *locals_[i];
    const Subdomain& sd = problem_.subdomains[i];
    l.reg.fill(sd.stiffness, l.kreg_values);
    try {
        l.factor.refactorize(l.kreg_values);
    } catch (const NotSpdError& e) {
        throw NotSpdError("subdomain " + std::to_string(i) + ": " + e.what(), e.pivot(), i);
    }
    ++numeric_calls_;
    if (config_.strategy == Strategy::implicit) return;

    PoolLease lease(*pool_, l.temp_bytes, static_cast<int>(i));
    std::byte* base = lease.data();
    DenseView out{l.f.data(), l.m, l.m, Order::row};
    if (config_.strategy == Strategy::explicit_assembly) {
        const ExplicitSizes sizes = explicit_sizes(config_, l.n, l.m);
        double* rhs = reinterpret_cast<double*>(base);
        double* fwd = reinterpret_cast<double*>(base + aligned_doubles(sizes.rhs));
        double* bwd = reinterpret_cast<double*>(base + aligned_doubles(sizes.rhs) + aligned_doubles(sizes.forward));
        ExplicitBuffers buf{{rhs, sizes.rhs}, {fwd, sizes.forward}, {bwd, sizes.backward}};
        if (backward_shares_forward(config_)) buf.backward = buf.forward;
        assemble_explicit_into(l.factor, l.b_perm, config_, buf, out);
    } else {
        double* aug = reinterpret_cast<double*>(base);
        schur_into(l.reg.pattern, l.kreg_values, problem_.constraints.local_b[i],
                   {aug, schur_doubles(l.n, l.m)}, out);
    }
}

void DualOperator::preprocess()
{
    if (stage_ == Stage::created) throw ContractViolation("DualOperator::preprocess: prepare() has not run");
    for_each_subdomain(all_subdomains_, [&](Index i) { preprocess_subdomain(i); });
    version_ = problem_.values_version;
    stage_ = Stage::preprocessed;
}

bool DualOperator::ready() const
{
    return stage_ == Stage::preprocessed && version_ == problem_.values_version;
}

void DualOperator::check_ready() const
{
    if (stage_ != Stage::preprocessed) throw ContractViolation("DualOperator: preprocess() has not run");
    if (version_ != problem_.values_version)
        throw ContractViolation("DualOperator: stiffness values changed since the last preprocess()");
}

void DualOperator::apply_local(Index i, std::span<const double> p, std::span<double> q)
{
    check_ready();
    Local& l = *locals_[i];
    if (static_cast<Index>(p.size()) != l.m || static_cast<Index>(q.size()) != l.m)
        throw InvalidArgument("DualOperator::apply_local: dual vector size mismatch");
    if (config_.strategy == Strategy::implicit) {
        implicit_apply_into(l.factor, l.b_perm, config_.forward_order, config_.backward_order, p, q, l.work);
    } else {
        dense_matvec(ConstDenseView{l.f.data(), l.m, l.m, Order::row}, p, q, MatrixShape::upper);
    }
}

void DualOperator::apply_cluster(Index c, std::span<const double> p, std::span<double> q)
{
    check_ready();
    const auto& subs = problem_.layout.cluster_subdomains[c];
    const auto& maps = problem_.layout.scatter_map;
    if (p.size() != problem_.layout.cluster_multipliers[c].size() || q.size() != p.size())
        throw InvalidArgument("DualOperator::apply_cluster: dual vector size mismatch");
    std::fill(q.begin(), q.end(), 0.0);
    const Index count = static_cast<Index>(subs.size());

    auto local = [&](Index i) {
        Local& l = *locals_[i];
        if (config_.strategy == Strategy::implicit)
            implicit_apply_into(l.factor, l.b_perm, config_.forward_order, config_.backward_order, l.p, l.q, l.work);
        else
            dense_matvec(ConstDenseView{l.f.data(), l.m, l.m, Order::row}, l.p, l.q, MatrixShape::upper);
    };

    if (config_.execution == Execution::serial) {
        for (Index i : subs) {
            scatter(maps[i], p, locals_[i]->p);
            local(i);
            gather_add(maps[i], locals_[i]->q, q);
        }
        return;
    }

    const int workers = worker_count();
    if (config_.staging == Staging::cluster_wide) {
        for (Index i : subs) scatter(maps[i], p, locals_[i]->p);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
        for (Index t = 0; t < count; ++t) local(subs[t]);
        for (Index i : subs) gather_add(maps[i], locals_[i]->q, q);
    } else {
        // Each task scatters its own slice; gathers run in subdomain order.
#pragma omp parallel for ordered schedule(static, 1) num_threads(workers)
        for (Index t = 0; t < count; ++t) {
            const Index i = subs[t];
            scatter(maps[i], p, locals_[i]->p);
            local(i);
#pragma omp ordered
            gather_add(maps[i], locals_[i]->q, q);
        }
    }
}

void DualOperator::apply(std::span<const double> p, std::span<double> q)
{
    check_ready();
    if (static_cast<Index>(p.size()) != problem_.multiplier_count() || q.size() != p.size())
        throw InvalidArgument("DualOperator::apply: dual vector size mismatch");
    std::fill(q.begin(), q.end(), 0.0);
    for (Index c = 0; c < problem_.layout.cluster_count(); ++c) {
        const auto& mults = problem_.layout.cluster_multipliers[c];
        ClusterBuffers& buf = clusters_[c];
        for (std::size_t k = 0; k < mults.size(); ++k) buf.p[k] = p[mults[k]];
        apply_cluster(c, buf.p, buf.q);
        for (std::size_t k = 0; k < mults.size(); ++k) q[mults[k]] += buf.q[k];
    }
}

void DualOperator::solve_primal(Index i, std::span<const double> b, std::span<double> x)
{
    if (stage_ != Stage::preprocessed) throw ContractViolation("DualOperator::solve_primal: preprocess() has not run");
    Local& l = *locals_[i];
    l.factor.solve(b, x, l.primal_work);
}

DenseMat DualOperator::local_operator(Index i) const
{
    const Local& l = *locals_[i];
    if (l.f.empty() && l.m > 0) throw ContractViolation("DualOperator::local_operator: no explicit F for this strategy");
    DenseMat f(l.m, l.m, Order::row);
    for (Index r = 0; r < l.m; ++r)
        for (Index c = r; c < l.m; ++c) {
            f(r, c) = l.f[static_cast<std::size_t>(r) * l.m + c];
            f(c, r) = f(r, c);
        }
    return f;
}

const CholFactor& DualOperator::factor(Index i) const { return locals_[i]->factor; }
const SparseCsr& DualOperator::regularized_pattern(Index i) const { return locals_[i]->reg.pattern; }
std::span<const double> DualOperator::regularized_values(Index i) const { return locals_[i]->kreg_values; }
std::span<const double> DualOperator::explicit_storage(Index i) const { return locals_[i]->f; }
std::size_t DualOperator::temporary_bytes_needed(Index i) const { return locals_[i]->temp_bytes; }

} // namespace feti
