#pragma once

#include "feti/common.hpp"
#include "feti/sparse.hpp"

#include <memory>
#include <span>
#include <vector>

namespace feti {

enum class Ordering { rcm, natural };

/// Reverse Cuthill-McKee ordering of a structurally symmetric pattern.
/// Result maps new position -> original index.
std::vector<Index> reverse_cuthill_mckee(const SparseCsr& pattern);

/// Pattern and ordering stage of a sparse Cholesky factorization
/// P^T A P = U^T U. Immutable once built; shared by every numeric refill.
struct SymbolicFactor {
    Index n = 0;
    std::vector<Index> perm;   ///< new -> old
    std::vector<Index> iperm;  ///< old -> new
    std::vector<Index> parent; ///< elimination tree of the permuted matrix, -1 at roots

    // U row-compressed, diagonal first in every row.
    std::vector<Index> row_ptr;
    std::vector<Index> col_idx;
    // U column-compressed, diagonal last in every column, plus the CSR position of each entry.
    std::vector<Index> csc_ptr;
    std::vector<Index> csc_row;
    std::vector<Index> csc_to_csr;

    // Upper triangle of the permuted input, by permuted column, addressing the input value array.
    std::vector<Index> a_ptr;
    std::vector<Index> a_row;
    std::vector<Index> a_src;
    Index input_nnz = 0;

    Index factor_nnz() const { return static_cast<Index>(col_idx.size()); }
    /// Entries of U not present in the upper triangle of the input.
    Index fill = 0;
};

SymbolicFactor symbolic_factorize(const SparseCsr& pattern, Ordering ordering = Ordering::rcm);
/// Uses the given permutation (new -> old) instead of computing one.
SymbolicFactor symbolic_factorize(const SparseCsr& pattern, std::span<const Index> permutation);

/// Numeric stage. Values live in the CSR order of the symbolic pattern; the
/// CSC copy is only materialized on request.
class CholFactor {
public:
    CholFactor() = default;
    explicit CholFactor(std::shared_ptr<const SymbolicFactor> symbolic);

    const SymbolicFactor& symbolic() const { return *symbolic_; }
    const std::shared_ptr<const SymbolicFactor>& symbolic_ptr() const { return symbolic_; }
    Index size() const { return symbolic_ ? symbolic_->n : 0; }

    /// Refills U from values of the pattern given to symbolic_factorize. Never reallocates.
    void refactorize(std::span<const double> values);
    /// Refreshes the CSC value copy from the CSR values.
    void update_csc();

    std::span<const double> csr_values() const { return values_; }
    std::span<const double> csc_values() const { return csc_values_; }

    SparseCsr upper_csr() const;
    SparseCsr upper_csc() const;

    /// Applies (P^T A P)^{-1} to a permuted vector in place.
    void solve_permuted_in_place(std::span<double> x) const;
    /// Applies A^{-1} to a vector in original ordering; `work` has size n.
    void solve(std::span<const double> b, std::span<double> x, std::span<double> work) const;
    std::vector<double> solve(std::span<const double> b) const;

private:
    std::shared_ptr<const SymbolicFactor> symbolic_;
    std::vector<double> values_;
    std::vector<double> csc_values_;
    std::vector<double> work_;
    std::vector<Index> cursor_;
};

CholFactor numeric_factorize(std::shared_ptr<const SymbolicFactor> symbolic, std::span<const double> values);

/// Kernel basis restricted to the fixing DOFs and orthonormalized. An empty
/// fixing set means every DOF.
DenseMat restricted_kernel_basis(const DenseMat& kernel, std::span<const Index> fixing_dofs);

/// Regularization K_reg = K + rho * Q Q^T with rho = trace(K)/n and Q the
/// orthonormal (restricted) kernel basis. The returned pattern contains K's
/// pattern plus the clique of the DOFs where Q is nonzero.
struct Regularization {
    SparseCsr pattern;              ///< full symmetric K_reg pattern (values unset)
    std::vector<Index> from_k;      ///< K value index -> K_reg value index
    std::vector<Index> block_pos;   ///< K_reg value index of each (a,b) in the support clique
    std::vector<Index> support;     ///< DOFs where Q is nonzero
    DenseMat q_support;             ///< Q restricted to `support` rows

    /// Writes K_reg values; `kreg_values` has pattern.nnz() entries.
    void fill(const SparseCsr& k, std::span<double> kreg_values) const;
    SparseCsr apply(const SparseCsr& k) const;
};

/// Checks ||K R|| <= tol * ||K|| and builds the regularization structure.
Regularization make_regularization(const SparseCsr& k, const DenseMat& kernel, std::span<const Index> fixing_dofs = {},
                                   double kernel_tol = 1e-8);

/// One-shot convenience: K_reg for the full kernel (every DOF fixed).
SparseCsr regularize(const SparseCsr& k, const DenseMat& kernel);

/// Triangular factor U seen through one of the Table-I storage/order variants.
struct UpperFactorView {
    Storage storage = Storage::sparse;
    Order order = Order::row;
    Index n = 0;
    std::span<const Index> ptr;   ///< sparse: CSR (row) or CSC (col) offsets
    std::span<const Index> idx;
    std::span<const double> val;  ///< sparse values, or the n*n dense buffer
};

UpperFactorView sparse_view(const CholFactor& f, Order order);
/// Densifies U into `out` (n*n, zeros explicit) with the given layout.
void factor_to_dense(const CholFactor& f, Order order, std::span<double> out);
DenseMat factor_to_dense(const CholFactor& f, Order order);
UpperFactorView dense_view(std::span<const double> dense, Index n, Order order);

/// Solves U X = B (transpose = no) or U^T X = B (transpose = yes) in place.
void trsm_in_place(const UpperFactorView& u, DenseView x, Transpose transpose);
/// Single-vector variant.
void trsv_in_place(const UpperFactorView& u, std::span<double> x, Transpose transpose);

/// Value-returning wrapper: the solution comes back in `rhs_order`.
DenseMat triangular_solve_multi(const CholFactor& f, const DenseMat& rhs, Transpose transpose,
                                Storage factor_storage, Order factor_order, Order rhs_order);

} // namespace feti
