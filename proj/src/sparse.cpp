#include "feti/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace feti {

SparseCsr::SparseCsr(Index rows, Index cols, std::vector<Index> offsets, std::vector<Index> indices,
                     std::vector<double> values, Order orientation)
    : rows_(rows), cols_(cols), offsets_(std::move(offsets)), indices_(std::move(indices)),
      values_(std::move(values)), orientation_(orientation)
{
    const Index major = major_size();
    const Index minor = orientation_ == Order::row ? cols_ : rows_;
    if (rows_ < 0 || cols_ < 0) throw InvalidArgument("SparseCsr: negative dimension");
    if (static_cast<Index>(offsets_.size()) != major + 1) throw InvalidArgument("SparseCsr: offsets size mismatch");
    if (offsets_.front() != 0 || offsets_.back() != static_cast<Index>(indices_.size()))
        throw InvalidArgument("SparseCsr: offsets do not cover indices");
    if (indices_.size() != values_.size()) throw InvalidArgument("SparseCsr: indices/values size mismatch");
    for (Index r = 0; r < major; ++r) {
        if (offsets_[r] > offsets_[r + 1]) throw InvalidArgument("SparseCsr: offsets decrease");
        for (Index p = offsets_[r]; p < offsets_[r + 1]; ++p) {
            if (indices_[p] < 0 || indices_[p] >= minor) throw InvalidArgument("SparseCsr: index out of range");
            if (p > offsets_[r] && indices_[p] <= indices_[p - 1])
                throw InvalidArgument("SparseCsr: indices not strictly increasing");
        }
    }
}

SparseCsr SparseCsr::from_triplets(Index rows, Index cols, std::span<const Index> ti,
                                   std::span<const Index> tj, std::span<const double> tv)
{
    if (ti.size() != tj.size() || ti.size() != tv.size()) throw InvalidArgument("from_triplets: size mismatch");
    std::vector<std::size_t> order(ti.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ti[a] != ti[b] ? ti[a] < ti[b] : tj[a] < tj[b];
    });
    std::vector<Index> offsets(static_cast<std::size_t>(rows) + 1, 0);
    std::vector<Index> indices;
    std::vector<double> values;
    indices.reserve(ti.size());
    values.reserve(ti.size());
    Index last_i = -1, last_j = -1;
    for (std::size_t k : order) {
        const Index i = ti[k], j = tj[k];
        if (i < 0 || i >= rows || j < 0 || j >= cols) throw InvalidArgument("from_triplets: index out of range");
        if (i == last_i && j == last_j) {
            values.back() += tv[k];
            continue;
        }
        indices.push_back(j);
        values.push_back(tv[k]);
        ++offsets[i + 1];
        last_i = i;
        last_j = j;
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    return SparseCsr(rows, cols, std::move(offsets), std::move(indices), std::move(values));
}

SparseCsr SparseCsr::identity(Index n)
{
    std::vector<Index> offsets(n + 1), indices(n);
    std::iota(offsets.begin(), offsets.end(), 0);
    std::iota(indices.begin(), indices.end(), 0);
    return SparseCsr(n, n, std::move(offsets), std::move(indices), std::vector<double>(n, 1.0));
}

SparseCsr SparseCsr::transposed() const
{
    const Order flipped = orientation_ == Order::row ? Order::col : Order::row;
    return SparseCsr(cols_, rows_, offsets_, indices_, values_, flipped);
}

SparseCsr SparseCsr::with_orientation(Order target) const
{
    if (target == orientation_) return *this;
    // Transpose the compressed arrays (classic counting sort).
    const Index major = major_size();
    const Index minor = orientation_ == Order::row ? cols_ : rows_;
    std::vector<Index> offsets(static_cast<std::size_t>(minor) + 1, 0);
    for (Index idx : indices_) ++offsets[idx + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    std::vector<Index> cursor(offsets.begin(), offsets.end() - 1);
    std::vector<Index> indices(indices_.size());
    std::vector<double> values(values_.size());
    for (Index r = 0; r < major; ++r) {
        for (Index p = offsets_[r]; p < offsets_[r + 1]; ++p) {
            const Index q = cursor[indices_[p]]++;
            indices[q] = r;
            values[q] = values_[p];
        }
    }
    return SparseCsr(rows_, cols_, std::move(offsets), std::move(indices), std::move(values), target);
}

double SparseCsr::at(Index i, Index j) const
{
    const Index line = orientation_ == Order::row ? i : j;
    const Index key = orientation_ == Order::row ? j : i;
    const auto first = indices_.begin() + offsets_[line];
    const auto last = indices_.begin() + offsets_[line + 1];
    const auto it = std::lower_bound(first, last, key);
    if (it == last || *it != key) return 0.0;
    return values_[static_cast<std::size_t>(it - indices_.begin())];
}

std::vector<double> SparseCsr::to_dense_row_major() const
{
    std::vector<double> dense(static_cast<std::size_t>(rows_) * cols_, 0.0);
    for (Index r = 0; r < major_size(); ++r) {
        for (Index p = offsets_[r]; p < offsets_[r + 1]; ++p) {
            const Index i = orientation_ == Order::row ? r : indices_[p];
            const Index j = orientation_ == Order::row ? indices_[p] : r;
            dense[static_cast<std::size_t>(i) * cols_ + j] = values_[p];
        }
    }
    return dense;
}

DenseMat::DenseMat(Index rows, Index cols, Order order)
    : rows_(rows), cols_(cols), order_(order), values_(static_cast<std::size_t>(rows) * cols, 0.0)
{
    if (rows < 0 || cols < 0) throw InvalidArgument("DenseMat: negative dimension");
}

DenseMat::DenseMat(Index rows, Index cols, Order order, std::vector<double> values)
    : rows_(rows), cols_(cols), order_(order), values_(std::move(values))
{
    if (values_.size() != static_cast<std::size_t>(rows) * cols) throw InvalidArgument("DenseMat: value count mismatch");
}

DenseMat DenseMat::identity(Index n, Order order)
{
    DenseMat m(n, n, order);
    for (Index i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMat DenseMat::with_order(Order target) const
{
    DenseMat out(rows_, cols_, target);
    for (Index i = 0; i < rows_; ++i)
        for (Index j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j);
    return out;
}

double max_abs_diff(const DenseMat& a, const DenseMat& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

double frobenius_norm(const DenseMat& a)
{
    return norm2(a.data());
}

double norm2(std::span<const double> x)
{
    return std::sqrt(dot(x, x));
}

double dot(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw InvalidArgument("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

void sparse_apply(const SparseCsr& a, std::span<const double> x, std::span<double> y, Transpose trans)
{
    const bool t = trans == Transpose::yes;
    const Index in = t ? a.rows() : a.cols();
    const Index out = t ? a.cols() : a.rows();
    if (static_cast<Index>(x.size()) != in || static_cast<Index>(y.size()) != out)
        throw InvalidArgument("sparse_apply: shape mismatch");
    // Effective storage: row-compressed access of op(A) means a dot form.
    const bool rows_of_op = (a.orientation() == Order::row) != t;
    const auto off = a.offsets();
    const auto idx = a.indices();
    const auto val = a.values();
    if (rows_of_op) {
        for (Index r = 0; r < out; ++r) {
            double s = 0.0;
            for (Index p = off[r]; p < off[r + 1]; ++p) s += val[p] * x[idx[p]];
            y[r] = s;
        }
    } else {
        std::fill(y.begin(), y.end(), 0.0);
        for (Index c = 0; c < in; ++c) {
            const double xc = x[c];
            if (xc == 0.0) continue;
            for (Index p = off[c]; p < off[c + 1]; ++p) y[idx[p]] += val[p] * xc;
        }
    }
}

std::vector<double> sparse_apply(const SparseCsr& a, std::span<const double> x, Transpose trans)
{
    std::vector<double> y(static_cast<std::size_t>(trans == Transpose::yes ? a.cols() : a.rows()));
    sparse_apply(a, x, y, trans);
    return y;
}

void sparse_dense_multiply(const SparseCsr& a, ConstDenseView x, DenseView y, Transpose trans)
{
    const bool t = trans == Transpose::yes;
    const Index in = t ? a.rows() : a.cols();
    const Index out = t ? a.cols() : a.rows();
    if (x.rows != in || y.rows != out || x.cols != y.cols) throw InvalidArgument("sparse_dense_multiply: shape mismatch");
    const bool rows_of_op = (a.orientation() == Order::row) != t;
    const auto off = a.offsets();
    const auto idx = a.indices();
    const auto val = a.values();
    const Index ncols = x.cols;
    if (rows_of_op) {
        for (Index r = 0; r < out; ++r)
            for (Index c = 0; c < ncols; ++c) {
                double s = 0.0;
                for (Index p = off[r]; p < off[r + 1]; ++p) s += val[p] * x(idx[p], c);
                y(r, c) = s;
            }
    } else {
        std::fill(y.data, y.data + y.size(), 0.0);
        for (Index k = 0; k < in; ++k)
            for (Index p = off[k]; p < off[k + 1]; ++p) {
                const double v = val[p];
                const Index r = idx[p];
                for (Index c = 0; c < ncols; ++c) y(r, c) += v * x(k, c);
            }
    }
}

DenseMat sparse_dense_multiply(const SparseCsr& a, const DenseMat& x, Transpose trans)
{
    DenseMat y(trans == Transpose::yes ? a.cols() : a.rows(), x.cols(), x.order());
    sparse_dense_multiply(a, x.view(), y.view(), trans);
    return y;
}

void syrk_upper(ConstDenseView a, DenseView c)
{
    const Index n = a.cols;
    if (c.rows != n || c.cols != n) throw InvalidArgument("syrk: output shape mismatch");
    const Index k = a.rows;
    if (a.order == Order::col) {
        // Columns contiguous: C(i,j) is a dot product of two columns.
        for (Index i = 0; i < n; ++i) {
            const double* ai = a.data + static_cast<std::size_t>(i) * k;
            for (Index j = i; j < n; ++j) {
                const double* aj = a.data + static_cast<std::size_t>(j) * k;
                double s = 0.0;
                for (Index r = 0; r < k; ++r) s += ai[r] * aj[r];
                c(i, j) = s;
            }
        }
    } else {
        for (Index i = 0; i < n; ++i)
            for (Index j = i; j < n; ++j) c(i, j) = 0.0;
        // Rank-1 updates, one per row of A.
        for (Index r = 0; r < k; ++r) {
            const double* ar = a.data + static_cast<std::size_t>(r) * n;
            for (Index i = 0; i < n; ++i) {
                const double v = ar[i];
                if (v == 0.0) continue;
                for (Index j = i; j < n; ++j) c(i, j) += v * ar[j];
            }
        }
    }
}

DenseMat syrk(const DenseMat& a)
{
    DenseMat c(a.cols(), a.cols(), a.order());
    syrk_upper(a.view(), c.view());
    for (Index i = 0; i < c.rows(); ++i)
        for (Index j = 0; j < i; ++j) c(i, j) = c(j, i);
    return c;
}

void dense_matvec(ConstDenseView f, std::span<const double> x, std::span<double> y, MatrixShape shape)
{
    if (static_cast<Index>(x.size()) != f.cols || static_cast<Index>(y.size()) != f.rows)
        throw InvalidArgument("dense_matvec: shape mismatch");
    if (shape == MatrixShape::upper && f.rows != f.cols) throw InvalidArgument("dense_matvec: triangle mode needs a square matrix");
    const Index n = f.rows;
    std::fill(y.begin(), y.end(), 0.0);
    if (shape == MatrixShape::full) {
        if (f.order == Order::row) {
            for (Index i = 0; i < n; ++i) {
                const double* fi = f.data + static_cast<std::size_t>(i) * f.cols;
                double s = 0.0;
                for (Index j = 0; j < f.cols; ++j) s += fi[j] * x[j];
                y[i] = s;
            }
        } else {
            for (Index j = 0; j < f.cols; ++j) {
                const double* fj = f.data + static_cast<std::size_t>(j) * f.rows;
                const double xj = x[j];
                for (Index i = 0; i < n; ++i) y[i] += fj[i] * xj;
            }
        }
        return;
    }
    // Symmetric, upper triangle stored: each off-diagonal entry is used twice.
    if (f.order == Order::row) {
        for (Index i = 0; i < n; ++i) {
            const double* fi = f.data + static_cast<std::size_t>(i) * n;
            const double xi = x[i];
            double s = fi[i] * xi;
            for (Index j = i + 1; j < n; ++j) {
                s += fi[j] * x[j];
                y[j] += fi[j] * xi;
            }
            y[i] += s;
        }
    } else {
        for (Index j = 0; j < n; ++j) {
            const double* fj = f.data + static_cast<std::size_t>(j) * n;
            const double xj = x[j];
            double s = 0.0;
            for (Index i = 0; i < j; ++i) {
                y[i] += fj[i] * xj;
                s += fj[i] * x[i];
            }
            y[j] += s + fj[j] * xj;
        }
    }
}

std::vector<double> dense_matvec(const DenseMat& f, std::span<const double> x, MatrixShape shape)
{
    std::vector<double> y(static_cast<std::size_t>(f.rows()));
    dense_matvec(f.view(), x, y, shape);
    return y;
}

void dense_cholesky_in_place(std::span<double> a, Index n, double relative_pivot_tol)
{
    if (a.size() != static_cast<std::size_t>(n) * n) throw InvalidArgument("dense_cholesky: buffer size mismatch");
    double max_diag = 0.0;
    for (Index k = 0; k < n; ++k) max_diag = std::max(max_diag, std::abs(a[static_cast<std::size_t>(k) * n + k]));
    const double floor = relative_pivot_tol * max_diag;
    // Right-looking, row-major upper factor: A = U^T U.
    for (Index k = 0; k < n; ++k) {
        double* uk = a.data() + static_cast<std::size_t>(k) * n;
        const double pivot = uk[k];
        if (!(pivot > floor) || !(pivot > 0.0) || !std::isfinite(pivot))
            throw NotSpdError("dense_cholesky: non-positive pivot at " + std::to_string(k), k);
        const double d = std::sqrt(pivot);
        uk[k] = d;
        for (Index j = k + 1; j < n; ++j) uk[j] /= d;
        for (Index i = k + 1; i < n; ++i) {
            const double uki = uk[i];
            if (uki == 0.0) continue;
            double* ui = a.data() + static_cast<std::size_t>(i) * n;
            for (Index j = i; j < n; ++j) ui[j] -= uki * uk[j];
        }
        for (Index i = k + 1; i < n; ++i) a[static_cast<std::size_t>(i) * n + k] = 0.0;
    }
}

void dense_cholesky_solve(std::span<const double> u, Index n, std::span<double> x)
{
    if (static_cast<Index>(x.size()) != n) throw InvalidArgument("dense_cholesky_solve: size mismatch");
    // U^T y = b: column-oriented over rows of U.
    for (Index i = 0; i < n; ++i) {
        const double* ui = u.data() + static_cast<std::size_t>(i) * n;
        x[i] /= ui[i];
        const double xi = x[i];
        for (Index j = i + 1; j < n; ++j) x[j] -= ui[j] * xi;
    }
    for (Index i = n - 1; i >= 0; --i) {
        const double* ui = u.data() + static_cast<std::size_t>(i) * n;
        double s = x[i];
        for (Index j = i + 1; j < n; ++j) s -= ui[j] * x[j];
        x[i] = s / ui[i];
    }
}

DenseCholesky::DenseCholesky(const DenseMat& c) : n_(c.rows())
{
    if (c.rows() != c.cols()) throw InvalidArgument("DenseCholesky: matrix not square");
    const DenseMat row_major = c.with_order(Order::row);
    u_.assign(row_major.data().begin(), row_major.data().end());
    dense_cholesky_in_place(u_, n_);
}

DenseMat DenseCholesky::factor() const
{
    return DenseMat(n_, n_, Order::row, u_);
}

void DenseCholesky::solve_in_place(std::span<double> x) const
{
    dense_cholesky_solve(u_, n_, x);
}

std::vector<double> DenseCholesky::solve(std::span<const double> b) const
{
    std::vector<double> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
}

} // namespace feti
