#include "feti/decomposition.hpp"

#include <algorithm>
#include <string>

namespace feti {

Partition partition(const Mesh& mesh, Index subdomains_per_side)
{
    if (subdomains_per_side < 1) throw InvalidArgument("partition: subdomains_per_side must be positive");
    const int d = mesh.dim;
    for (int a = 0; a < d; ++a) {
        if (mesh.cells[a] < 1) throw InvalidArgument("partition: mesh is not structured");
        if (mesh.cells[a] % subdomains_per_side != 0)
            throw InvalidArgument("partition: cells per side not divisible by subdomains per side");
    }
    const Index dpn = static_cast<Index>(dofs_per_node(mesh.physics, d));
    Partition part;
    part.global_dofs = mesh.dof_count();
    for (int a = 0; a < 3; ++a) part.grid[a] = a < d ? subdomains_per_side : 1;

    std::array<Index, 3> local_cells{0, 0, 0};
    std::array<double, 3> local_extent{1.0, 1.0, 1.0};
    for (int a = 0; a < d; ++a) {
        local_cells[a] = mesh.cells[a] / subdomains_per_side;
        local_extent[a] = mesh.extent[a] / subdomains_per_side;
    }
    const Index gnx = mesh.cells[0] + 1;
    const Index gny = d >= 2 ? mesh.cells[1] + 1 : 1;

    for (Index sz = 0; sz < part.grid[2]; ++sz)
        for (Index sy = 0; sy < part.grid[1]; ++sy)
            for (Index sx = 0; sx < part.grid[0]; ++sx) {
                const Index s_ijk[3] = {sx, sy, sz};
                std::array<double, 3> origin = mesh.origin;
                for (int a = 0; a < d; ++a) origin[a] += local_extent[a] * s_ijk[a];
                SubdomainMesh sub;
                sub.mesh = generate_box_mesh(d, local_cells, origin, local_extent, mesh.physics);
                const Index lnx = local_cells[0] + 1;
                const Index lny = d >= 2 ? local_cells[1] + 1 : 1;
                const Index lnz = d >= 3 ? local_cells[2] + 1 : 1;
                for (Index z = 0; z < lnz; ++z)
                    for (Index y = 0; y < lny; ++y)
                        for (Index x = 0; x < lnx; ++x) {
                            const Index gx = sx * local_cells[0] + x;
                            const Index gy = d >= 2 ? sy * local_cells[1] + y : 0;
                            const Index gz = d >= 3 ? sz * local_cells[2] + z : 0;
                            const Index g = gx + gnx * (gy + gny * gz);
                            sub.mesh.coords[sub.node_map.size()] = mesh.coords[g];
                            sub.node_map.push_back(g);
                        }
                for (Index g : sub.node_map)
                    for (Index c = 0; c < dpn; ++c) sub.dof_map.push_back(g * dpn + c);
                part.subdomains.push_back(std::move(sub));
            }
    return part;
}

Index ConstraintSet::gluing_count() const
{
    return static_cast<Index>(std::count(kind.begin(), kind.end(), MultiplierKind::gluing));
}

Index ConstraintSet::dirichlet_count() const
{
    return static_cast<Index>(std::count(kind.begin(), kind.end(), MultiplierKind::dirichlet));
}

ConstraintSet build_constraints(const Partition& part, std::span<const std::pair<Index, double>> dirichlet)
{
    struct Owner {
        Index subdomain;
        Index local_dof;
    };
    std::vector<std::vector<Owner>> owners(part.global_dofs);
    for (Index s = 0; s < part.size(); ++s) {
        const auto& map = part.subdomains[s].dof_map;
        for (Index l = 0; l < static_cast<Index>(map.size()); ++l) owners[map[l]].push_back({s, l});
    }

    struct Entry {
        Index multiplier;
        Index local_dof;
        double value;
    };
    std::vector<std::vector<Entry>> entries(part.size());
    ConstraintSet cs;
    for (Index g = 0; g < part.global_dofs; ++g) {
        const auto& own = owners[g];
        for (std::size_t j = 0; j + 1 < own.size(); ++j) {
            const Index m = cs.multiplier_count++;
            entries[own[j].subdomain].push_back({m, own[j].local_dof, 1.0});
            entries[own[j + 1].subdomain].push_back({m, own[j + 1].local_dof, -1.0});
            cs.rhs.push_back(0.0);
            cs.kind.push_back(MultiplierKind::gluing);
        }
    }
    std::vector<std::pair<Index, double>> dir(dirichlet.begin(), dirichlet.end());
    std::sort(dir.begin(), dir.end());
    for (const auto& [g, value] : dir) {
        if (g < 0 || g >= part.global_dofs || owners[g].empty())
            throw InvalidArgument("build_constraints: Dirichlet DOF " + std::to_string(g) + " not found in any subdomain");
        for (const Owner& o : owners[g]) {
            const Index m = cs.multiplier_count++;
            entries[o.subdomain].push_back({m, o.local_dof, 1.0});
            cs.rhs.push_back(value);
            cs.kind.push_back(MultiplierKind::dirichlet);
        }
    }

    for (Index s = 0; s < part.size(); ++s) {
        auto& e = entries[s];
        std::sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) { return a.multiplier < b.multiplier; });
        std::vector<Index> mults;
        std::vector<Index> ti, tj;
        std::vector<double> tv;
        for (const Entry& x : e) {
            if (mults.empty() || mults.back() != x.multiplier) mults.push_back(x.multiplier);
            ti.push_back(static_cast<Index>(mults.size()) - 1);
            tj.push_back(x.local_dof);
            tv.push_back(x.value);
        }
        const Index ndofs = static_cast<Index>(part.subdomains[s].dof_map.size());
        cs.local_b.push_back(SparseCsr::from_triplets(static_cast<Index>(mults.size()), ndofs, ti, tj, tv));
        cs.local_multipliers.push_back(std::move(mults));
    }
    return cs;
}

ClusterLayout build_clusters(const Partition& part, const ConstraintSet& constraints, Index cluster_count)
{
    const Index n = part.size();
    if (cluster_count < 1 || n % cluster_count != 0)
        throw InvalidArgument("build_clusters: cluster count must divide the subdomain count");
    const Index per = n / cluster_count;
    ClusterLayout layout;
    layout.subdomain_cluster.resize(n);
    layout.scatter_map.resize(n);
    for (Index c = 0; c < cluster_count; ++c) {
        std::vector<Index> subs;
        std::vector<Index> mults;
        for (Index s = c * per; s < (c + 1) * per; ++s) {
            subs.push_back(s);
            layout.subdomain_cluster[s] = c;
            const auto& lm = constraints.local_multipliers[s];
            mults.insert(mults.end(), lm.begin(), lm.end());
        }
        std::sort(mults.begin(), mults.end());
        mults.erase(std::unique(mults.begin(), mults.end()), mults.end());
        for (Index s : subs) {
            auto& map = layout.scatter_map[s];
            for (Index m : constraints.local_multipliers[s])
                map.push_back(static_cast<Index>(std::lower_bound(mults.begin(), mults.end(), m) - mults.begin()));
        }
        layout.cluster_subdomains.push_back(std::move(subs));
        layout.cluster_multipliers.push_back(std::move(mults));
    }
    return layout;
}

void scatter(std::span<const Index> map, std::span<const double> cluster, std::span<double> local)
{
    for (std::size_t j = 0; j < map.size(); ++j) local[j] = cluster[map[j]];
}

void gather_add(std::span<const Index> map, std::span<const double> local, std::span<double> cluster)
{
    for (std::size_t j = 0; j < map.size(); ++j) cluster[map[j]] += local[j];
}

} // namespace feti
