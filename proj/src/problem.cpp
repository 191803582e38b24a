#include "feti/problem.hpp"

#include "feti/feti_solver.hpp"

#include <stdexcept>

namespace feti {

namespace {

Index node_at(const Mesh& mesh, std::array<Index, 3> ijk)
{
    Index id = 0;
    Index stride = 1;
    for (int a = 0; a < mesh.dim; ++a) {
        id += ijk[a] * stride;
        stride *= mesh.cells[a] + 1;
    }
    return id;
}

} // namespace

std::vector<Index> default_fixing_dofs(const Mesh& mesh)
{
    const Index dpn = static_cast<Index>(dofs_per_node(mesh.physics, mesh.dim));
    std::vector<Index> nodes;
    if (mesh.physics == Physics::heat || mesh.dim == 1) {
        std::array<Index, 3> mid{0, 0, 0};
        for (int a = 0; a < mesh.dim; ++a) mid[a] = mesh.cells[a] / 2;
        nodes.push_back(node_at(mesh, mid));
    } else if (mesh.dim == 2) {
        nodes.push_back(node_at(mesh, {0, 0, 0}));
        nodes.push_back(node_at(mesh, {mesh.cells[0], mesh.cells[1], 0}));
    } else {
        nodes.push_back(node_at(mesh, {0, 0, 0}));
        nodes.push_back(node_at(mesh, {mesh.cells[0], 0, 0}));
        nodes.push_back(node_at(mesh, {0, mesh.cells[1], 0}));
    }
    std::vector<Index> dofs;
    for (Index v : nodes)
        for (Index c = 0; c < dpn; ++c) dofs.push_back(v * dpn + c);
    return dofs;
}

FetiProblem build_problem(const ProblemSpec& spec)
{
    if (spec.cells_per_subdomain < 1 || spec.subdomains_per_side < 1)
        throw InvalidArgument("build_problem: cells and subdomains per side must be positive");
    FetiProblem p;
    p.spec = spec;
    p.global_mesh = generate_mesh(spec.dim, spec.cells_per_subdomain * spec.subdomains_per_side, spec.physics);
    p.partition = partition(p.global_mesh, spec.subdomains_per_side);
    p.subdomains.resize(p.partition.size());
    for (Index s = 0; s < p.partition.size(); ++s) {
        Subdomain& sd = p.subdomains[s];
        sd.geometry = p.partition.subdomains[s];
        GlobalSystem local = assemble_system(sd.geometry.mesh, spec.material);
        sd.stiffness = std::move(local.stiffness);
        sd.load = std::move(local.load);
        sd.kernel = build_kernel(spec.physics, sd.geometry.mesh, &sd.stiffness);
        sd.fixing_dofs = default_fixing_dofs(sd.geometry.mesh);
    }
    p.dirichlet = dirichlet_dofs(p.global_mesh, spec.dirichlet_face, spec.dirichlet_value);
    p.constraints = build_constraints(p.partition, p.dirichlet);
    p.layout = build_clusters(p.partition, p.constraints, spec.clusters);
    return p;
}

void FetiProblem::set_coefficient(double coefficient)
{
    if (!(coefficient > 0.0)) throw InvalidArgument("set_coefficient: coefficient must be positive");
    spec.material.coefficient = coefficient;
    for (Subdomain& sd : subdomains) reassemble_stiffness(sd.geometry.mesh, spec.material, sd.stiffness);
    ++values_version;
}

GlobalSystem FetiProblem::global_system() const
{
    GlobalSystem g = assemble_system(global_mesh, spec.material);
    g.dirichlet = dirichlet;
    return g;
}

std::vector<double> to_global(const FetiProblem& problem, const std::vector<std::vector<double>>& local)
{
    if (static_cast<Index>(local.size()) != problem.subdomain_count())
        throw InvalidArgument("to_global: one local vector per subdomain expected");
    std::vector<double> u(problem.partition.global_dofs, 0.0);
    std::vector<char> seen(u.size(), 0);
    for (Index s = 0; s < problem.subdomain_count(); ++s) {
        const auto& map = problem.subdomains[s].geometry.dof_map;
        if (local[s].size() != map.size()) throw InvalidArgument("to_global: local vector size mismatch");
        for (std::size_t j = 0; j < map.size(); ++j) {
            if (seen[map[j]]) continue;
            seen[map[j]] = 1;
            u[map[j]] = local[s][j];
        }
    }
    return u;
}

} // namespace feti
