#pragma once

#include "feti/common.hpp"
#include "feti/mesh_fem.hpp"
#include "feti/sparse.hpp"

#include <span>
#include <utility>
#include <vector>

namespace feti {

struct SubdomainMesh {
    Mesh mesh;
    std::vector<Index> node_map; ///< local node -> global node
    std::vector<Index> dof_map;  ///< local DOF -> global DOF
};

struct Partition {
    std::array<Index, 3> grid{1, 1, 1};
    Index global_dofs = 0;
    std::vector<SubdomainMesh> subdomains;

    Index size() const { return static_cast<Index>(subdomains.size()); }
};

/// Regular box decomposition of a structured mesh; subdomains numbered with x fastest.
Partition partition(const Mesh& mesh, Index subdomains_per_side);

enum class MultiplierKind { gluing, dirichlet };

struct ConstraintSet {
    Index multiplier_count = 0;
    std::vector<double> rhs;                 ///< c
    std::vector<MultiplierKind> kind;
    /// Per subdomain: rows are the multipliers touching it (ascending global index).
    std::vector<SparseCsr> local_b;
    std::vector<std::vector<Index>> local_multipliers; ///< local row -> global multiplier

    Index gluing_count() const;
    Index dirichlet_count() const;
};

/// Chained gluing (k-1 rows for a DOF shared by k subdomains), then one
/// Dirichlet row per owning subdomain.
ConstraintSet build_constraints(const Partition& partition, std::span<const std::pair<Index, double>> dirichlet);

struct ClusterLayout {
    std::vector<std::vector<Index>> cluster_subdomains;
    std::vector<std::vector<Index>> cluster_multipliers;  ///< cluster dual index -> global multiplier
    std::vector<Index> subdomain_cluster;
    /// Per subdomain: local dual index -> position in its cluster's dual vector.
    std::vector<std::vector<Index>> scatter_map;

    Index cluster_count() const { return static_cast<Index>(cluster_subdomains.size()); }
};

ClusterLayout build_clusters(const Partition& partition, const ConstraintSet& constraints, Index cluster_count);

/// p_local[j] = p_cluster[map[j]]
void scatter(std::span<const Index> map, std::span<const double> cluster, std::span<double> local);
/// q_cluster[map[j]] += q_local[j]
void gather_add(std::span<const Index> map, std::span<const double> local, std::span<double> cluster);

} // namespace feti
