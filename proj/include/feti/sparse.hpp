#pragma once

#include "feti/common.hpp"

#include <span>
#include <vector>

namespace feti {

/// Compressed sparse matrix. With `Order::row` the arrays are CSR; with
/// `Order::col` the same arrays are read as CSC, which is the transpose of the
/// CSR interpretation.
class SparseCsr {
public:
    SparseCsr() = default;
    SparseCsr(Index rows, Index cols, std::vector<Index> offsets, std::vector<Index> indices,
              std::vector<double> values, Order orientation = Order::row);

    /// Builds from unsorted triplets; duplicates are summed.
    static SparseCsr from_triplets(Index rows, Index cols, std::span<const Index> ti,
                                   std::span<const Index> tj, std::span<const double> tv);
    static SparseCsr identity(Index n);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index nnz() const { return static_cast<Index>(indices_.size()); }
    Order orientation() const { return orientation_; }

    /// Number of compressed lines (rows for CSR, columns for CSC).
    Index major_size() const { return orientation_ == Order::row ? rows_ : cols_; }

    std::span<const Index> offsets() const { return offsets_; }
    std::span<const Index> indices() const { return indices_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Reinterprets the arrays with the opposite orientation: exact transpose, no copy of structure logic.
    SparseCsr transposed() const;
    /// Same matrix, stored with the requested orientation.
    SparseCsr with_orientation(Order target) const;

    double at(Index i, Index j) const;
    std::vector<double> to_dense_row_major() const;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Index> offsets_{0};
    std::vector<Index> indices_;
    std::vector<double> values_;
    Order orientation_ = Order::row;
};

/// Non-owning dense matrix view with natural leading dimension.
template <typename T>
struct BasicDenseView {
    T* data = nullptr;
    Index rows = 0;
    Index cols = 0;
    Order order = Order::col;

    T& operator()(Index i, Index j) const
    {
        return order == Order::row ? data[static_cast<std::size_t>(i) * cols + j]
                                   : data[static_cast<std::size_t>(j) * rows + i];
    }
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

using DenseView = BasicDenseView<double>;
using ConstDenseView = BasicDenseView<const double>;

class DenseMat {
public:
    DenseMat() = default;
    DenseMat(Index rows, Index cols, Order order = Order::col);
    DenseMat(Index rows, Index cols, Order order, std::vector<double> values);
    static DenseMat identity(Index n, Order order = Order::col);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Order order() const { return order_; }

    double& operator()(Index i, Index j) { return view()(i, j); }
    double operator()(Index i, Index j) const { return view()(i, j); }

    std::span<double> data() { return values_; }
    std::span<const double> data() const { return values_; }

    DenseView view() { return {values_.data(), rows_, cols_, order_}; }
    ConstDenseView view() const { return {values_.data(), rows_, cols_, order_}; }

    /// Same matrix with the other memory layout.
    DenseMat with_order(Order target) const;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    Order order_ = Order::col;
    std::vector<double> values_;
};

double max_abs_diff(const DenseMat& a, const DenseMat& b);
double frobenius_norm(const DenseMat& a);
double norm2(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);

enum class Transpose { no, yes };

/// y = A x (or A^T x). Overwrites y.
void sparse_apply(const SparseCsr& a, std::span<const double> x, std::span<double> y, Transpose trans = Transpose::no);
std::vector<double> sparse_apply(const SparseCsr& a, std::span<const double> x, Transpose trans = Transpose::no);

/// Y = A X (or A^T X). Y keeps its own order and is overwritten.
void sparse_dense_multiply(const SparseCsr& a, ConstDenseView x, DenseView y, Transpose trans = Transpose::no);
DenseMat sparse_dense_multiply(const SparseCsr& a, const DenseMat& x, Transpose trans = Transpose::no);

/// Upper triangle of C = A^T A written into c (lower triangle untouched).
void syrk_upper(ConstDenseView a, DenseView c);
/// C = A^T A with both triangles populated.
DenseMat syrk(const DenseMat& a);

enum class MatrixShape { full, upper };

/// y = F x. With `MatrixShape::upper` only the upper triangle of F is read.
void dense_matvec(ConstDenseView f, std::span<const double> x, std::span<double> y, MatrixShape shape = MatrixShape::full);
std::vector<double> dense_matvec(const DenseMat& f, std::span<const double> x, MatrixShape shape = MatrixShape::full);

/// Dense SPD factorization C = U^T U held in a row-major upper triangle.
class DenseCholesky {
public:
    DenseCholesky() = default;
    explicit DenseCholesky(const DenseMat& c);

    Index size() const { return n_; }
    /// Row-major n*n buffer; entries below the diagonal are zero.
    const std::vector<double>& upper() const { return u_; }
    DenseMat factor() const;

    void solve_in_place(std::span<double> x) const;
    std::vector<double> solve(std::span<const double> b) const;

private:
    Index n_ = 0;
    std::vector<double> u_;
};

/// In-place dense Cholesky on a row-major n*n buffer: upper triangle becomes U, lower is zeroed.
/// Pivots at or below `relative_pivot_tol * max(diag)` count as non-positive.
void dense_cholesky_in_place(std::span<double> a, Index n, double relative_pivot_tol = 0.0);
/// Solves U^T U x = b in place using a row-major upper factor.
void dense_cholesky_solve(std::span<const double> u, Index n, std::span<double> x);

} // namespace feti
