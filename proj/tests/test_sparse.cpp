#include "feti/sparse.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace feti;
using namespace feti::testing;

TEST(SparseCsr, TripletsSumDuplicatesAndSortColumns)
{
    const std::vector<Index> ti{1, 0, 1, 0};
    const std::vector<Index> tj{2, 1, 2, 0};
    const std::vector<double> tv{1.0, 2.0, 3.0, 4.0};
    const SparseCsr a = SparseCsr::from_triplets(2, 3, ti, tj, tv);
    EXPECT_EQ(a.nnz(), 3);
    EXPECT_EQ(a.at(0, 0), 4.0);
    EXPECT_EQ(a.at(0, 1), 2.0);
    EXPECT_EQ(a.at(1, 2), 4.0);
    EXPECT_EQ(a.at(1, 0), 0.0);
}

TEST(SparseCsr, RejectsMalformedArrays)
{
    EXPECT_THROW(SparseCsr(2, 2, {0, 2, 1}, {0, 1}, {1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(SparseCsr(1, 3, {0, 2}, {1, 1}, {1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(SparseCsr(1, 3, {0, 1}, {3}, {1.0}), InvalidArgument);
}

TEST(SparseCsr, OrientationFlipIsExactTranspose)
{
    std::mt19937_64 rng(1);
    const SparseCsr a = random_sparse(rng, 7, 5, 0.4);
    const SparseCsr t = a.transposed();
    ASSERT_EQ(t.rows(), 5);
    ASSERT_EQ(t.cols(), 7);
    for (Index i = 0; i < 7; ++i)
        for (Index j = 0; j < 5; ++j) EXPECT_EQ(t.at(j, i), a.at(i, j));
    const SparseCsr c = a.with_orientation(Order::col);
    EXPECT_EQ(c.orientation(), Order::col);
    EXPECT_EQ(c.to_dense_row_major(), a.to_dense_row_major());
    EXPECT_EQ(c.with_orientation(Order::row).to_dense_row_major(), a.to_dense_row_major());
}

TEST(SparseApply, IdentityAndHandCase)
{
    const std::vector<double> x{1.0, -2.0, 3.0};
    EXPECT_EQ(sparse_apply(SparseCsr::identity(3), x), x);
    const SparseCsr a(1, 2, {0, 2}, {0, 1}, {1.0, -1.0});
    const std::vector<double> y = sparse_apply(a, std::vector<double>{3.0, 1.0});
    ASSERT_EQ(y.size(), 1u);
    EXPECT_EQ(y[0], 2.0);
}

TEST(SparseApply, AdjointPairOnRandomInstances)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        SparseCsr a = random_sparse(rng, 9, 6, 0.3);
        if (trial % 2) a = a.with_orientation(Order::col);
        const auto x = random_vector(rng, 6);
        const auto y = random_vector(rng, 9);
        const double lhs = dot(sparse_apply(a, x), y);
        const double rhs = dot(x, sparse_apply(a, y, Transpose::yes));
        EXPECT_NEAR(lhs, rhs, 1e-13);
        const Eigen::VectorXd ref = to_eigen(a) * to_eigen(x);
        EXPECT_LE((to_eigen(sparse_apply(a, x)) - ref).norm(), 1e-13);
    }
}

TEST(SparseApply, ShapeMismatchThrows)
{
    const SparseCsr a = SparseCsr::identity(3);
    EXPECT_THROW(sparse_apply(a, std::vector<double>{1.0, 2.0}), InvalidArgument);
}

TEST(SparseDenseMultiply, SingleColumnMatchesSparseApply)
{
    std::mt19937_64 rng(3);
    const SparseCsr a = random_sparse(rng, 6, 4, 0.5);
    const auto x = random_vector(rng, 4);
    const DenseMat xm(4, 1, Order::col, x);
    const DenseMat y = sparse_dense_multiply(a, xm);
    const auto ref = sparse_apply(a, x);
    for (Index i = 0; i < 6; ++i) EXPECT_EQ(y(i, 0), ref[i]);
}

TEST(SparseDenseMultiply, IdentityAndDenseOracle)
{
    std::mt19937_64 rng(4);
    const DenseMat x = from_eigen(Eigen::MatrixXd::Random(20, 5));
    EXPECT_EQ(max_abs_diff(sparse_dense_multiply(SparseCsr::identity(20), x), x), 0.0);
    const SparseCsr a = random_sparse(rng, 30, 20, 0.2);
    for (Order xo : {Order::row, Order::col})
        for (Order ao : {Order::row, Order::col}) {
            const SparseCsr aa = a.with_orientation(ao);
            const DenseMat xx = x.with_order(xo);
            const Eigen::MatrixXd ref = to_eigen(a) * to_eigen(x);
            EXPECT_LE((to_eigen(sparse_dense_multiply(aa, xx)) - ref).cwiseAbs().maxCoeff(), 1e-12);
            const DenseMat z = from_eigen(Eigen::MatrixXd::Random(30, 3), xo);
            const Eigen::MatrixXd ref_t = to_eigen(a).transpose() * to_eigen(z);
            EXPECT_LE((to_eigen(sparse_dense_multiply(aa, z, Transpose::yes)) - ref_t).cwiseAbs().maxCoeff(), 1e-12);
        }
}

TEST(Syrk, HandCases)
{
    const DenseMat a(2, 1, Order::col, {1.0, 2.0});
    const DenseMat c = syrk(a);
    ASSERT_EQ(c.rows(), 1);
    EXPECT_EQ(c(0, 0), 5.0);
    EXPECT_EQ(max_abs_diff(syrk(DenseMat::identity(4)), DenseMat::identity(4)), 0.0);
}

TEST(Syrk, MatchesDenseOracleInBothLayouts)
{
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(5, 3);
    const Eigen::MatrixXd ref = a.transpose() * a;
    for (Order o : {Order::row, Order::col}) {
        const DenseMat c = syrk(from_eigen(a, o));
        EXPECT_LE((to_eigen(c) - ref).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(to_eigen(c));
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(DenseMatvec, IdentityAndUpperTriangle)
{
    const std::vector<double> x{1.0, 1.0};
    EXPECT_EQ(dense_matvec(DenseMat::identity(2), x), x);
    DenseMat f(2, 2, Order::row, {2.0, 1.0, 99.0, 3.0});  // lower entry must be ignored
    const auto y = dense_matvec(f, x, MatrixShape::upper);
    EXPECT_EQ(y, (std::vector<double>{3.0, 4.0}));
}

TEST(DenseMatvec, TriangleModeMatchesFullStorage)
{
    std::mt19937_64 rng(5);
    Eigen::MatrixXd s = Eigen::MatrixXd::Random(12, 12);
    s = (s + s.transpose()).eval();
    const auto x = random_vector(rng, 12);
    for (Order o : {Order::row, Order::col}) {
        const DenseMat full = from_eigen(s, o);
        DenseMat upper = full;
        for (Index i = 0; i < 12; ++i)
            for (Index j = 0; j < i; ++j) upper(i, j) = -1e300;
        const auto a = dense_matvec(full, x);
        const auto b = dense_matvec(upper, x, MatrixShape::upper);
        for (int i = 0; i < 12; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
    }
}

TEST(DenseCholesky, HandCases)
{
    EXPECT_EQ(max_abs_diff(DenseCholesky(DenseMat::identity(3)).factor(), DenseMat::identity(3)), 0.0);
    const DenseCholesky c(DenseMat(2, 2, Order::row, {4.0, 2.0, 2.0, 5.0}));
    const DenseMat u = c.factor();
    EXPECT_DOUBLE_EQ(u(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(u(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(u(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(u(1, 1), 2.0);
}

TEST(DenseCholesky, RandomSolveResidual)
{
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd a = Eigen::MatrixXd::Random(40, 40);
    const Eigen::MatrixXd spd = a * a.transpose() + 40.0 * Eigen::MatrixXd::Identity(40, 40);
    const DenseCholesky c(from_eigen(spd));
    const auto b = random_vector(rng, 40);
    const auto x = c.solve(b);
    const double res = (spd * to_eigen(x) - to_eigen(b)).norm();
    EXPECT_LE(res, 1e-12 * spd.norm() * to_eigen(x).norm());
}

TEST(DenseCholesky, NonPositivePivotThrows)
{
    EXPECT_THROW(DenseCholesky(DenseMat(2, 2, Order::row, {1.0, 2.0, 2.0, 1.0})), NotSpdError);
}
