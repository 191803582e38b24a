#pragma once

#include "feti/sparse.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace feti::testing {

inline Eigen::MatrixXd to_eigen(const SparseCsr& a)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) m(i, j) = a.at(i, j);
    return m;
}

inline Eigen::MatrixXd to_eigen(const DenseMat& a)
{
    Eigen::MatrixXd m(a.rows(), a.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
    return m;
}

inline DenseMat from_eigen(const Eigen::MatrixXd& m, Order order = Order::col)
{
    DenseMat a(static_cast<Index>(m.rows()), static_cast<Index>(m.cols()), order);
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) a(i, j) = m(i, j);
    return a;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n)
{
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

/// Random sparse matrix with roughly `density` nonzeros per entry.
inline SparseCsr random_sparse(std::mt19937_64& rng, Index rows, Index cols, double density)
{
    std::uniform_real_distribution<double> u(0.0, 1.0), v(-1.0, 1.0);
    std::vector<Index> ti, tj;
    std::vector<double> tv;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            if (u(rng) < density) {
                ti.push_back(i);
                tj.push_back(j);
                tv.push_back(v(rng));
            }
    return SparseCsr::from_triplets(rows, cols, ti, tj, tv);
}

/// Sparse SPD matrix: random symmetric pattern made diagonally dominant.
inline SparseCsr random_spd(std::mt19937_64& rng, Index n, double density)
{
    std::uniform_real_distribution<double> u(0.0, 1.0), v(-1.0, 1.0);
    std::vector<Index> ti, tj;
    std::vector<double> tv;
    std::vector<double> diag(n, 1.0);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j)
            if (u(rng) < density) {
                const double x = v(rng);
                ti.insert(ti.end(), {i, j});
                tj.insert(tj.end(), {j, i});
                tv.insert(tv.end(), {x, x});
                diag[i] += std::abs(x);
                diag[j] += std::abs(x);
            }
    for (Index i = 0; i < n; ++i) {
        ti.push_back(i);
        tj.push_back(i);
        tv.push_back(diag[i]);
    }
    return SparseCsr::from_triplets(n, n, ti, tj, tv);
}

inline SparseCsr from_dense(const Eigen::MatrixXd& m)
{
    std::vector<Index> ti, tj;
    std::vector<double> tv;
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            if (m(i, j) != 0.0) {
                ti.push_back(i);
                tj.push_back(j);
                tv.push_back(m(i, j));
            }
    return SparseCsr::from_triplets(static_cast<Index>(m.rows()), static_cast<Index>(m.cols()), ti, tj, tv);
}

} // namespace feti::testing
