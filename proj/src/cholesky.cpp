#include "feti/cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace feti {

namespace {

struct Graph {
    std::vector<Index> ptr;
    std::vector<Index> adj;
    Index degree(Index v) const { return ptr[v + 1] - ptr[v]; }
};

void require_square(const SparseCsr& pattern)
{
    if (pattern.rows() != pattern.cols()) throw InvalidArgument("symbolic_factorize: pattern not square");
}

// Off-diagonal adjacency of a row-compressed, structurally symmetric pattern.
Graph adjacency(const SparseCsr& a)
{
    const Index n = a.rows();
    Graph g;
    g.ptr.assign(n + 1, 0);
    const auto off = a.offsets();
    const auto idx = a.indices();
    for (Index i = 0; i < n; ++i) {
        for (Index p = off[i]; p < off[i + 1]; ++p)
            if (idx[p] != i) ++g.ptr[i + 1];
    }
    std::partial_sum(g.ptr.begin(), g.ptr.end(), g.ptr.begin());
    g.adj.resize(g.ptr.back());
    for (Index i = 0, q = 0; i < n; ++i) {
        for (Index p = off[i]; p < off[i + 1]; ++p)
            if (idx[p] != i) g.adj[q++] = idx[p];
    }
    return g;
}

void check_structural_symmetry(const SparseCsr& a)
{
    const Index n = a.rows();
    const auto off = a.offsets();
    const auto idx = a.indices();
    for (Index i = 0; i < n; ++i) {
        for (Index p = off[i]; p < off[i + 1]; ++p) {
            const Index j = idx[p];
            const auto first = idx.begin() + off[j];
            const auto last = idx.begin() + off[j + 1];
            if (!std::binary_search(first, last, i))
                throw InvalidArgument("symbolic_factorize: pattern is structurally non-symmetric");
        }
    }
}

// Breadth-first level structure; returns the last level and the depth.
std::pair<std::vector<Index>, Index> last_level(const Graph& g, Index root, std::vector<Index>& mark, Index stamp)
{
    std::vector<Index> level{root};
    mark[root] = stamp;
    Index depth = 0;
    while (true) {
        std::vector<Index> next;
        for (Index v : level)
            for (Index p = g.ptr[v]; p < g.ptr[v + 1]; ++p) {
                const Index w = g.adj[p];
                if (mark[w] != stamp) {
                    mark[w] = stamp;
                    next.push_back(w);
                }
            }
        if (next.empty()) return {level, depth};
        level = std::move(next);
        ++depth;
    }
}

} // namespace

std::vector<Index> reverse_cuthill_mckee(const SparseCsr& pattern)
{
    require_square(pattern);
    const SparseCsr a = pattern.with_orientation(Order::row);
    const Index n = a.rows();
    const Graph g = adjacency(a);
    std::vector<Index> order;
    order.reserve(n);
    std::vector<char> visited(n, 0);
    std::vector<Index> mark(n, -1);
    Index stamp = 0;
    std::vector<Index> by_degree(n);
    std::iota(by_degree.begin(), by_degree.end(), 0);
    std::stable_sort(by_degree.begin(), by_degree.end(), [&](Index x, Index y) { return g.degree(x) < g.degree(y); });

    for (Index seed : by_degree) {
        if (visited[seed]) continue;
        // George-Liu pseudo-peripheral node search.
        Index root = seed;
        auto [level, depth] = last_level(g, root, mark, stamp++);
        while (true) {
            const Index candidate = *std::min_element(level.begin(), level.end(), [&](Index x, Index y) {
                return g.degree(x) != g.degree(y) ? g.degree(x) < g.degree(y) : x < y;
            });
            auto [next_level, next_depth] = last_level(g, candidate, mark, stamp++);
            if (next_depth <= depth) break;
            root = candidate;
            level = std::move(next_level);
            depth = next_depth;
        }
        // Cuthill-McKee BFS, neighbours by increasing degree.
        std::size_t head = order.size();
        order.push_back(root);
        visited[root] = 1;
        std::vector<Index> nbrs;
        while (head < order.size()) {
            const Index v = order[head++];
            nbrs.clear();
            for (Index p = g.ptr[v]; p < g.ptr[v + 1]; ++p)
                if (!visited[g.adj[p]]) nbrs.push_back(g.adj[p]);
            std::sort(nbrs.begin(), nbrs.end(), [&](Index x, Index y) {
                return g.degree(x) != g.degree(y) ? g.degree(x) < g.degree(y) : x < y;
            });
            for (Index w : nbrs) {
                visited[w] = 1;
                order.push_back(w);
            }
        }
    }
    std::reverse(order.begin(), order.end());
    return order;
}

SymbolicFactor symbolic_factorize(const SparseCsr& pattern, Ordering ordering)
{
    require_square(pattern);
    std::vector<Index> perm;
    if (ordering == Ordering::rcm) {
        perm = reverse_cuthill_mckee(pattern);
    } else {
        perm.resize(pattern.rows());
        std::iota(perm.begin(), perm.end(), 0);
    }
    return symbolic_factorize(pattern, perm);
}

SymbolicFactor symbolic_factorize(const SparseCsr& pattern, std::span<const Index> permutation)
{
    require_square(pattern);
    if (pattern.orientation() != Order::row) throw InvalidArgument("symbolic_factorize: expects a row-compressed pattern");
    check_structural_symmetry(pattern);
    const Index n = pattern.rows();
    if (static_cast<Index>(permutation.size()) != n) throw InvalidArgument("symbolic_factorize: permutation size mismatch");

    SymbolicFactor s;
    s.n = n;
    s.perm.assign(permutation.begin(), permutation.end());
    s.iperm.assign(n, -1);
    for (Index k = 0; k < n; ++k) {
        const Index old = s.perm[k];
        if (old < 0 || old >= n || s.iperm[old] != -1) throw InvalidArgument("symbolic_factorize: invalid permutation");
        s.iperm[old] = k;
    }
    s.input_nnz = pattern.nnz();

    // Upper triangle of P^T A P by column, rows ascending.
    const auto off = pattern.offsets();
    const auto idx = pattern.indices();
    s.a_ptr.assign(n + 1, 0);
    for (Index i = 0; i < n; ++i)
        for (Index p = off[i]; p < off[i + 1]; ++p) {
            const Index ni = s.iperm[i], nj = s.iperm[idx[p]];
            if (ni <= nj) ++s.a_ptr[nj + 1];
        }
    std::partial_sum(s.a_ptr.begin(), s.a_ptr.end(), s.a_ptr.begin());
    s.a_row.resize(s.a_ptr.back());
    s.a_src.resize(s.a_ptr.back());
    {
        std::vector<Index> cursor(s.a_ptr.begin(), s.a_ptr.end() - 1);
        for (Index i = 0; i < n; ++i)
            for (Index p = off[i]; p < off[i + 1]; ++p) {
                const Index ni = s.iperm[i], nj = s.iperm[idx[p]];
                if (ni > nj) continue;
                const Index q = cursor[nj]++;
                s.a_row[q] = ni;
                s.a_src[q] = p;
            }
        for (Index k = 0; k < n; ++k) {
            std::vector<std::pair<Index, Index>> col;
            for (Index q = s.a_ptr[k]; q < s.a_ptr[k + 1]; ++q) col.emplace_back(s.a_row[q], s.a_src[q]);
            std::sort(col.begin(), col.end());
            for (Index q = s.a_ptr[k], t = 0; q < s.a_ptr[k + 1]; ++q, ++t) {
                s.a_row[q] = col[t].first;
                s.a_src[q] = col[t].second;
            }
        }
    }

    // Elimination tree with path compression.
    s.parent.assign(n, -1);
    std::vector<Index> ancestor(n, -1);
    for (Index k = 0; k < n; ++k) {
        for (Index q = s.a_ptr[k]; q < s.a_ptr[k + 1]; ++q) {
            Index i = s.a_row[q];
            while (i != -1 && i < k) {
                const Index next = ancestor[i];
                ancestor[i] = k;
                if (next == -1) {
                    s.parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }

    // Column k of U = row k of L = etree reach of the column's upper entries.
    std::vector<Index> mark(n, -1);
    std::vector<std::vector<Index>> columns(n);
    for (Index k = 0; k < n; ++k) {
        mark[k] = k;
        auto& col = columns[k];
        for (Index q = s.a_ptr[k]; q < s.a_ptr[k + 1]; ++q) {
            for (Index i = s.a_row[q]; i != -1 && mark[i] != k; i = s.parent[i]) {
                col.push_back(i);
                mark[i] = k;
            }
        }
        std::sort(col.begin(), col.end());
        col.push_back(k);
    }
    s.csc_ptr.assign(n + 1, 0);
    for (Index k = 0; k < n; ++k) s.csc_ptr[k + 1] = s.csc_ptr[k] + static_cast<Index>(columns[k].size());
    s.csc_row.resize(s.csc_ptr.back());
    for (Index k = 0; k < n; ++k) std::copy(columns[k].begin(), columns[k].end(), s.csc_row.begin() + s.csc_ptr[k]);

    s.row_ptr.assign(n + 1, 0);
    for (Index r : s.csc_row) ++s.row_ptr[r + 1];
    std::partial_sum(s.row_ptr.begin(), s.row_ptr.end(), s.row_ptr.begin());
    s.col_idx.resize(s.csc_row.size());
    s.csc_to_csr.resize(s.csc_row.size());
    std::vector<Index> cursor(s.row_ptr.begin(), s.row_ptr.end() - 1);
    for (Index k = 0; k < n; ++k)
        for (Index p = s.csc_ptr[k]; p < s.csc_ptr[k + 1]; ++p) {
            const Index q = cursor[s.csc_row[p]]++;
            s.col_idx[q] = k;
            s.csc_to_csr[p] = q;
        }

    s.fill = s.factor_nnz() - s.a_ptr.back();
    return s;
}

CholFactor::CholFactor(std::shared_ptr<const SymbolicFactor> symbolic) : symbolic_(std::move(symbolic))
{
    if (!symbolic_) throw InvalidArgument("CholFactor: null symbolic factor");
    values_.assign(symbolic_->col_idx.size(), 0.0);
    csc_values_.assign(symbolic_->col_idx.size(), 0.0);
    work_.assign(symbolic_->n, 0.0);
}

void CholFactor::refactorize(std::span<const double> values)
{
    const SymbolicFactor& s = *symbolic_;
    if (static_cast<Index>(values.size()) != s.input_nnz) throw InvalidArgument("numeric_factorize: value count does not match pattern");
    const Index n = s.n;
    double* x = work_.data();
    double* u = values_.data();
    // Up-looking Cholesky over the fixed pattern.
    for (Index k = 0; k < n; ++k) {
        for (Index q = s.a_ptr[k]; q < s.a_ptr[k + 1]; ++q) x[s.a_row[q]] = values[s.a_src[q]];
        double d = x[k];
        x[k] = 0.0;
        const Index diag_pos = s.csc_ptr[k + 1] - 1;
        for (Index p = s.csc_ptr[k]; p < diag_pos; ++p) {
            const Index i = s.csc_row[p];
            const double lki = x[i] / u[s.row_ptr[i]];
            x[i] = 0.0;
            for (Index q = s.row_ptr[i] + 1; q < s.row_ptr[i + 1] && s.col_idx[q] < k; ++q) x[s.col_idx[q]] -= u[q] * lki;
            d -= lki * lki;
            u[s.csc_to_csr[p]] = lki;
        }
        if (!(d > 0.0) || !std::isfinite(d)) {
            std::fill(work_.begin(), work_.end(), 0.0);
            throw NotSpdError("numeric_factorize: non-positive pivot at permuted index " + std::to_string(k), k);
        }
        u[s.row_ptr[k]] = std::sqrt(d);
    }
    update_csc();
}

void CholFactor::update_csc()
{
    const SymbolicFactor& s = *symbolic_;
    for (std::size_t p = 0; p < s.csc_to_csr.size(); ++p) csc_values_[p] = values_[s.csc_to_csr[p]];
}

SparseCsr CholFactor::upper_csr() const
{
    const SymbolicFactor& s = *symbolic_;
    return SparseCsr(s.n, s.n, s.row_ptr, s.col_idx, values_, Order::row);
}

SparseCsr CholFactor::upper_csc() const
{
    const SymbolicFactor& s = *symbolic_;
    return SparseCsr(s.n, s.n, s.csc_ptr, s.csc_row, csc_values_, Order::col);
}

void CholFactor::solve_permuted_in_place(std::span<double> x) const
{
    const UpperFactorView u = sparse_view(*this, Order::row);
    trsv_in_place(u, x, Transpose::yes);
    trsv_in_place(u, x, Transpose::no);
}

void CholFactor::solve(std::span<const double> b, std::span<double> x, std::span<double> work) const
{
    const SymbolicFactor& s = *symbolic_;
    if (static_cast<Index>(b.size()) != s.n || static_cast<Index>(x.size()) != s.n || static_cast<Index>(work.size()) != s.n)
        throw InvalidArgument("CholFactor::solve: size mismatch");
    for (Index k = 0; k < s.n; ++k) work[k] = b[s.perm[k]];
    solve_permuted_in_place(work);
    for (Index k = 0; k < s.n; ++k) x[s.perm[k]] = work[k];
}

std::vector<double> CholFactor::solve(std::span<const double> b) const
{
    std::vector<double> x(b.size()), work(b.size());
    solve(b, x, work);
    return x;
}

CholFactor numeric_factorize(std::shared_ptr<const SymbolicFactor> symbolic, std::span<const double> values)
{
    CholFactor f(std::move(symbolic));
    f.refactorize(values);
    return f;
}

DenseMat restricted_kernel_basis(const DenseMat& kernel, std::span<const Index> fixing_dofs)
{
    const Index n = kernel.rows();
    const Index k = kernel.cols();
    DenseMat q(n, k, Order::col);
    if (fixing_dofs.empty()) {
        q = kernel.with_order(Order::col);
    } else {
        for (Index d : fixing_dofs) {
            if (d < 0 || d >= n) throw InvalidArgument("restricted_kernel_basis: fixing DOF out of range");
            for (Index c = 0; c < k; ++c) q(d, c) = kernel(d, c);
        }
    }
    // Modified Gram-Schmidt, two passes.
    for (Index c = 0; c < k; ++c) {
        std::span<double> qc = q.data().subspan(static_cast<std::size_t>(c) * n, n);
        const double original = norm2(qc);
        for (int pass = 0; pass < 2; ++pass)
            for (Index b = 0; b < c; ++b) {
                std::span<const double> qb = q.data().subspan(static_cast<std::size_t>(b) * n, n);
                const double proj = dot(qb, qc);
                for (Index i = 0; i < n; ++i) qc[i] -= proj * qb[i];
            }
        const double nrm = norm2(qc);
        if (!(nrm > 1e-10 * original) || nrm == 0.0)
            throw InvalidArgument("restricted_kernel_basis: kernel columns are linearly dependent on the fixing DOFs");
        for (double& v : qc) v /= nrm;
    }
    return q;
}

void Regularization::fill(const SparseCsr& k, std::span<double> kreg_values) const
{
    if (static_cast<Index>(kreg_values.size()) != pattern.nnz() || static_cast<Index>(from_k.size()) != k.nnz())
        throw InvalidArgument("Regularization::fill: size mismatch");
    std::fill(kreg_values.begin(), kreg_values.end(), 0.0);
    const auto kv = k.values();
    for (std::size_t p = 0; p < from_k.size(); ++p) kreg_values[from_k[p]] += kv[p];
    if (support.empty()) return;
    double trace = 0.0;
    const auto off = k.offsets();
    const auto idx = k.indices();
    for (Index i = 0; i < k.rows(); ++i)
        for (Index p = off[i]; p < off[i + 1]; ++p)
            if (idx[p] == i) trace += kv[p];
    const double rho = trace / k.rows();
    const Index m = static_cast<Index>(support.size());
    const Index kdim = q_support.cols();
    for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b) {
            double s = 0.0;
            for (Index c = 0; c < kdim; ++c) s += q_support(a, c) * q_support(b, c);
            kreg_values[block_pos[static_cast<std::size_t>(a) * m + b]] += rho * s;
        }
}

SparseCsr Regularization::apply(const SparseCsr& k) const
{
    SparseCsr out = pattern;
    fill(k, out.values());
    return out;
}

Regularization make_regularization(const SparseCsr& k, const DenseMat& kernel, std::span<const Index> fixing_dofs,
                                   double kernel_tol)
{
    if (k.rows() != k.cols() || k.orientation() != Order::row) throw InvalidArgument("regularize: expects square row-compressed K");
    const Index n = k.rows();
    Regularization reg;
    if (kernel.cols() > 0) {
        if (kernel.rows() != n) throw InvalidArgument("regularize: kernel row count mismatch");
        // ||K R||_F <= tol ||K||_F
        double kr = 0.0;
        for (Index c = 0; c < kernel.cols(); ++c) {
            std::vector<double> col(n);
            for (Index i = 0; i < n; ++i) col[i] = kernel(i, c);
            const auto y = sparse_apply(k, col);
            kr += dot(y, y) / std::max(dot(col, col), 1e-300);
        }
        const double knorm = norm2(k.values());
        if (std::sqrt(kr) > kernel_tol * knorm) throw InvalidArgument("regularize: kernel basis does not annihilate K");
        const DenseMat q = restricted_kernel_basis(kernel, fixing_dofs);
        for (Index i = 0; i < n; ++i) {
            bool nonzero = false;
            for (Index c = 0; c < q.cols(); ++c) nonzero = nonzero || q(i, c) != 0.0;
            if (nonzero) reg.support.push_back(i);
        }
        reg.q_support = DenseMat(static_cast<Index>(reg.support.size()), q.cols(), Order::col);
        for (std::size_t a = 0; a < reg.support.size(); ++a)
            for (Index c = 0; c < q.cols(); ++c) reg.q_support(static_cast<Index>(a), c) = q(reg.support[a], c);
    }

    // Pattern union: K entries plus the support clique.
    std::vector<Index> ti, tj;
    const auto off = k.offsets();
    const auto idx = k.indices();
    for (Index i = 0; i < n; ++i)
        for (Index p = off[i]; p < off[i + 1]; ++p) {
            ti.push_back(i);
            tj.push_back(idx[p]);
        }
    for (Index a : reg.support)
        for (Index b : reg.support) {
            ti.push_back(a);
            tj.push_back(b);
        }
    const std::vector<double> zeros(ti.size(), 0.0);
    reg.pattern = SparseCsr::from_triplets(n, n, ti, tj, zeros);
    auto position = [&](Index i, Index j) {
        const auto po = reg.pattern.offsets();
        const auto pi = reg.pattern.indices();
        const auto it = std::lower_bound(pi.begin() + po[i], pi.begin() + po[i + 1], j);
        return static_cast<Index>(it - pi.begin());
    };
    reg.from_k.resize(k.nnz());
    for (Index i = 0; i < n; ++i)
        for (Index p = off[i]; p < off[i + 1]; ++p) reg.from_k[p] = position(i, idx[p]);
    const std::size_t m = reg.support.size();
    reg.block_pos.resize(m * m);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) reg.block_pos[a * m + b] = position(reg.support[a], reg.support[b]);
    return reg;
}

SparseCsr regularize(const SparseCsr& k, const DenseMat& kernel)
{
    return make_regularization(k, kernel).apply(k);
}

UpperFactorView sparse_view(const CholFactor& f, Order order)
{
    const SymbolicFactor& s = f.symbolic();
    UpperFactorView v;
    v.storage = Storage::sparse;
    v.order = order;
    v.n = s.n;
    if (order == Order::row) {
        v.ptr = s.row_ptr;
        v.idx = s.col_idx;
        v.val = f.csr_values();
    } else {
        v.ptr = s.csc_ptr;
        v.idx = s.csc_row;
        v.val = f.csc_values();
    }
    return v;
}

void factor_to_dense(const CholFactor& f, Order order, std::span<double> out)
{
    const SymbolicFactor& s = f.symbolic();
    const std::size_t n = static_cast<std::size_t>(s.n);
    if (out.size() != n * n) throw InvalidArgument("factor_to_dense: buffer size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    const auto vals = f.csr_values();
    for (Index i = 0; i < s.n; ++i)
        for (Index p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
            const std::size_t j = static_cast<std::size_t>(s.col_idx[p]);
            out[order == Order::row ? i * n + j : j * n + i] = vals[p];
        }
}

DenseMat factor_to_dense(const CholFactor& f, Order order)
{
    DenseMat d(f.size(), f.size(), order);
    factor_to_dense(f, order, d.data());
    return d;
}

UpperFactorView dense_view(std::span<const double> dense, Index n, Order order)
{
    if (dense.size() != static_cast<std::size_t>(n) * n) throw InvalidArgument("dense_view: buffer size mismatch");
    UpperFactorView v;
    v.storage = Storage::dense;
    v.order = order;
    v.n = n;
    v.val = dense;
    return v;
}

namespace {

// A "line" is a row of U (order = row) or a column of U (order = col),
// without its diagonal.
struct SparseLines {
    const Index* ptr;
    const Index* idx;
    const double* val;
    bool diag_first;

    double diag(Index i) const { return diag_first ? val[ptr[i]] : val[ptr[i + 1] - 1]; }
    template <typename F>
    void each(Index i, F&& f) const
    {
        const Index b = diag_first ? ptr[i] + 1 : ptr[i];
        const Index e = diag_first ? ptr[i + 1] : ptr[i + 1] - 1;
        for (Index p = b; p < e; ++p) f(idx[p], val[p]);
    }
};

struct DenseLines {
    const double* val;
    Index n;
    bool after_diag;

    double diag(Index i) const { return val[static_cast<std::size_t>(i) * n + i]; }
    template <typename F>
    void each(Index i, F&& f) const
    {
        const double* line = val + static_cast<std::size_t>(i) * n;
        const Index b = after_diag ? i + 1 : 0;
        const Index e = after_diag ? n : i;
        for (Index j = b; j < e; ++j) f(j, line[j]);
    }
};

template <typename Lines>
void check_diagonal(const Lines& lines, Index n)
{
    for (Index i = 0; i < n; ++i)
        if (lines.diag(i) == 0.0) throw InvalidArgument("triangular solve: zero diagonal entry at " + std::to_string(i));
}

template <typename Lines>
void solve_lines(const Lines& lines, Index n, DenseView x, bool dot_form, bool ascending)
{
    if (x.order == Order::col) {
        for (Index c = 0; c < x.cols; ++c) {
            double* xc = x.data + static_cast<std::size_t>(c) * n;
            for (Index t = 0; t < n; ++t) {
                const Index i = ascending ? t : n - 1 - t;
                if (dot_form) {
                    double s = xc[i];
                    lines.each(i, [&](Index j, double v) { s -= v * xc[j]; });
                    xc[i] = s / lines.diag(i);
                } else {
                    const double xi = xc[i] / lines.diag(i);
                    xc[i] = xi;
                    if (xi != 0.0) lines.each(i, [&](Index j, double v) { xc[j] -= v * xi; });
                }
            }
        }
        return;
    }
    const Index m = x.cols;
    for (Index t = 0; t < n; ++t) {
        const Index i = ascending ? t : n - 1 - t;
        double* xi = x.data + static_cast<std::size_t>(i) * m;
        const double d = lines.diag(i);
        if (dot_form) {
            lines.each(i, [&](Index j, double v) {
                const double* xj = x.data + static_cast<std::size_t>(j) * m;
                for (Index c = 0; c < m; ++c) xi[c] -= v * xj[c];
            });
            for (Index c = 0; c < m; ++c) xi[c] /= d;
        } else {
            for (Index c = 0; c < m; ++c) xi[c] /= d;
            lines.each(i, [&](Index j, double v) {
                double* xj = x.data + static_cast<std::size_t>(j) * m;
                for (Index c = 0; c < m; ++c) xj[c] -= v * xi[c];
            });
        }
    }
}

} // namespace

void trsm_in_place(const UpperFactorView& u, DenseView x, Transpose transpose)
{
    if (x.rows != u.n) throw InvalidArgument("triangular solve: shape mismatch between factor and right-hand side");
    const bool trans = transpose == Transpose::yes;
    // Rows of U + U x = b -> dot form; rows of U + U^T x = b -> axpy form; columns swap the two.
    const bool dot_form = (u.order == Order::row) != trans;
    const bool ascending = trans;
    if (u.storage == Storage::sparse) {
        const SparseLines lines{u.ptr.data(), u.idx.data(), u.val.data(), u.order == Order::row};
        check_diagonal(lines, u.n);
        solve_lines(lines, u.n, x, dot_form, ascending);
    } else {
        if (u.val.size() != static_cast<std::size_t>(u.n) * u.n) throw InvalidArgument("triangular solve: dense factor size mismatch");
        const DenseLines lines{u.val.data(), u.n, u.order == Order::row};
        check_diagonal(lines, u.n);
        solve_lines(lines, u.n, x, dot_form, ascending);
    }
}

void trsv_in_place(const UpperFactorView& u, std::span<double> x, Transpose transpose)
{
    trsm_in_place(u, DenseView{x.data(), static_cast<Index>(x.size()), 1, Order::col}, transpose);
}

DenseMat triangular_solve_multi(const CholFactor& f, const DenseMat& rhs, Transpose transpose,
                                Storage factor_storage, Order factor_order, Order rhs_order)
{
    DenseMat x = rhs.with_order(rhs_order);
    if (factor_storage == Storage::sparse) {
        trsm_in_place(sparse_view(f, factor_order), x.view(), transpose);
    } else {
        const DenseMat dense = factor_to_dense(f, factor_order);
        trsm_in_place(dense_view(dense.data(), f.size(), factor_order), x.view(), transpose);
    }
    return x;
}

} // namespace feti
