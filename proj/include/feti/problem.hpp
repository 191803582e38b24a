#pragma once

#include "feti/decomposition.hpp"
#include "feti/mesh_fem.hpp"
#include "feti/sparse.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace feti {

struct ProblemSpec {
    Physics physics = Physics::heat;
    int dim = 2;
    Index cells_per_subdomain = 4;  ///< cells along each axis of one subdomain
    Index subdomains_per_side = 2;
    Index clusters = 1;
    std::string dirichlet_face = "x0";
    double dirichlet_value = 0.0;
    Material material;
};

struct Subdomain {
    SubdomainMesh geometry;
    SparseCsr stiffness;
    std::vector<double> load;
    DenseMat kernel;                 ///< orthonormal basis of ker K_i (n x k)
    std::vector<Index> fixing_dofs;  ///< DOFs carrying the regularization; empty = all

    Index dofs() const { return stiffness.rows(); }
};

/// Everything the dual operator and the solver read. Tests may also fill it by hand.
struct FetiProblem {
    ProblemSpec spec;
    Mesh global_mesh;
    Partition partition;
    std::vector<Subdomain> subdomains;
    ConstraintSet constraints;
    ClusterLayout layout;
    std::vector<std::pair<Index, double>> dirichlet;
    std::uint64_t values_version = 0;

    Index subdomain_count() const { return static_cast<Index>(subdomains.size()); }
    Index multiplier_count() const { return constraints.multiplier_count; }

    /// Reassembles every K_i with a new material coefficient (pattern unchanged).
    void set_coefficient(double coefficient);
    /// Global system with the current material, for the direct oracle.
    GlobalSystem global_system() const;
};

FetiProblem build_problem(const ProblemSpec& spec);

/// Fixing DOFs used by the default regularization: one central node for heat,
/// two (2D) or three (3D) box corners for elasticity.
std::vector<Index> default_fixing_dofs(const Mesh& mesh);

/// Global solution assembled from subdomain solutions (first owner wins).
std::vector<double> to_global(const FetiProblem& problem, const std::vector<std::vector<double>>& local);

} // namespace feti
