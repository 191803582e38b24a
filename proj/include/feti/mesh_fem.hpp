#pragma once

#include "feti/common.hpp"
#include "feti/sparse.hpp"

#include <array>
#include <string_view>
#include <utility>
#include <vector>

namespace feti {

/// Simplicial mesh. Structured meshes also record the box they cover so that
/// faces can be located and the mesh can be split into subdomains.
struct Mesh {
    int dim = 0;
    std::vector<std::array<double, 3>> coords;
    std::vector<std::array<Index, 4>> elements; ///< first dim+1 entries used
    Physics physics = Physics::heat;

    std::array<Index, 3> cells{0, 0, 0};         ///< cells per axis (structured only)
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    std::array<double, 3> extent{1.0, 1.0, 1.0};

    Index node_count() const { return static_cast<Index>(coords.size()); }
    Index element_count() const { return static_cast<Index>(elements.size()); }
    int nodes_per_element() const { return dim + 1; }
    Index dof_count() const { return node_count() * static_cast<Index>(dofs_per_node(physics, dim)); }

    bool operator==(const Mesh&) const = default;
};

/// Structured mesh of an axis-aligned box; nodes numbered lexicographically
/// with x fastest. Squares split into two triangles, cubes into six Kuhn tetrahedra.
Mesh generate_box_mesh(int dim, std::array<Index, 3> cells, std::array<double, 3> origin,
                       std::array<double, 3> extent, Physics physics);

/// Unit segment/square/cube with `cells_per_side` cells along each axis.
Mesh generate_mesh(int dim, Index cells_per_side, Physics physics);

struct Material {
    double coefficient = 1.0;     ///< conductivity (heat) or Young's modulus (elasticity)
    double poisson_ratio = 0.3;   ///< elasticity only; plane strain in 2D
    std::array<double, 3> body_force{1.0, 1.0, 1.0};
};

struct GlobalSystem {
    SparseCsr stiffness;
    std::vector<double> load;
    std::vector<std::pair<Index, double>> dirichlet;
};

/// Element-wise assembly with linear shape functions.
GlobalSystem assemble_system(const Mesh& mesh, const Material& material);

/// Assembles only the stiffness values into an existing pattern (same mesh).
void reassemble_stiffness(const Mesh& mesh, const Material& material, SparseCsr& stiffness);

/// DOFs on a face of the box, sorted. Face names: x0, x1, y0, y1, z0, z1
/// (also "left"/"right" for x0/x1).
std::vector<std::pair<Index, double>> dirichlet_dofs(const Mesh& mesh, std::string_view face, double value = 0.0);

/// Nodes lying on a face of the box.
std::vector<Index> face_nodes(const Mesh& mesh, std::string_view face);

/// Dense reference solve with Dirichlet rows eliminated.
std::vector<double> solve_direct_reference(const GlobalSystem& system);

} // namespace feti
