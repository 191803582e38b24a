#include "feti/mesh_fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace feti {

Mesh generate_box_mesh(int dim, std::array<Index, 3> cells, std::array<double, 3> origin,
                       std::array<double, 3> extent, Physics physics)
{
    if (dim < 1 || dim > 3) throw InvalidArgument("generate_mesh: dim must be 1, 2 or 3");
    for (int a = 0; a < dim; ++a) {
        if (cells[a] < 1) throw InvalidArgument("generate_mesh: cells per side must be positive");
        if (!(extent[a] > 0.0)) throw InvalidArgument("generate_mesh: extent must be positive");
    }
    Mesh m;
    m.dim = dim;
    m.physics = physics;
    m.origin = origin;
    m.extent = extent;
    for (int a = 0; a < 3; ++a) m.cells[a] = a < dim ? cells[a] : 0;

    const Index nx = m.cells[0] + 1;
    const Index ny = dim >= 2 ? m.cells[1] + 1 : 1;
    const Index nz = dim >= 3 ? m.cells[2] + 1 : 1;
    m.coords.reserve(static_cast<std::size_t>(nx) * ny * nz);
    for (Index z = 0; z < nz; ++z)
        for (Index y = 0; y < ny; ++y)
            for (Index x = 0; x < nx; ++x) {
                std::array<double, 3> c{0.0, 0.0, 0.0};
                const Index ijk[3] = {x, y, z};
                for (int a = 0; a < dim; ++a) c[a] = origin[a] + extent[a] * ijk[a] / m.cells[a];
                m.coords.push_back(c);
            }
    auto node = [&](Index x, Index y, Index z) { return x + nx * (y + ny * z); };

    if (dim == 1) {
        for (Index x = 0; x < m.cells[0]; ++x) m.elements.push_back({node(x, 0, 0), node(x + 1, 0, 0), -1, -1});
    } else if (dim == 2) {
        for (Index y = 0; y < m.cells[1]; ++y)
            for (Index x = 0; x < m.cells[0]; ++x) {
                const Index v00 = node(x, y, 0), v10 = node(x + 1, y, 0);
                const Index v01 = node(x, y + 1, 0), v11 = node(x + 1, y + 1, 0);
                m.elements.push_back({v00, v10, v11, -1});
                m.elements.push_back({v00, v11, v01, -1});
            }
    } else {
        constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (Index z = 0; z < m.cells[2]; ++z)
            for (Index y = 0; y < m.cells[1]; ++y)
                for (Index x = 0; x < m.cells[0]; ++x) {
                    auto corner = [&](int bits) { return node(x + (bits & 1), y + ((bits >> 1) & 1), z + ((bits >> 2) & 1)); };
                    for (const auto& p : perms) {
                        const int b1 = 1 << p[0];
                        const int b2 = b1 | (1 << p[1]);
                        m.elements.push_back({corner(0), corner(b1), corner(b2), corner(7)});
                    }
                }
    }
    return m;
}

Mesh generate_mesh(int dim, Index cells_per_side, Physics physics)
{
    if (cells_per_side < 1) throw InvalidArgument("generate_mesh: cells_per_side must be positive");
    return generate_box_mesh(dim, {cells_per_side, cells_per_side, cells_per_side}, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, physics);
}

namespace {

struct Simplex {
    double volume = 0.0;
    double grad[4][3] = {}; ///< gradients of the barycentric coordinates
};

Simplex simplex_geometry(const Mesh& mesh, const std::array<Index, 4>& el)
{
    const int d = mesh.dim;
    double j[3][3] = {};
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) j[r][c] = mesh.coords[el[c + 1]][r] - mesh.coords[el[0]][r];
    double det = 0.0;
    double inv[3][3] = {};
    double scale = 0.0;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) scale = std::max(scale, std::abs(j[r][c]));
    if (d == 1) {
        det = j[0][0];
        if (det != 0.0) inv[0][0] = 1.0 / det;
    } else if (d == 2) {
        det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if (det != 0.0) {
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
        }
    } else {
        det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
              j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
        if (det != 0.0) {
            inv[0][0] = (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det;
            inv[0][1] = (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det;
            inv[0][2] = (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det;
            inv[1][0] = (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det;
            inv[1][1] = (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det;
            inv[1][2] = (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det;
            inv[2][0] = (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det;
            inv[2][1] = (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det;
            inv[2][2] = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det;
        }
    }
    if (std::abs(det) <= 1e-14 * std::pow(scale, d) || scale == 0.0)
        throw InvalidArgument("assemble_system: degenerate element");
    Simplex s;
    s.volume = std::abs(det) / (d == 1 ? 1.0 : d == 2 ? 2.0 : 6.0);
    for (int a = 1; a <= d; ++a)
        for (int x = 0; x < d; ++x) s.grad[a][x] = inv[a - 1][x];
    for (int x = 0; x < d; ++x) {
        double sum = 0.0;
        for (int a = 1; a <= d; ++a) sum += s.grad[a][x];
        s.grad[0][x] = -sum;
    }
    return s;
}

// Isotropic constitutive matrix in Voigt notation (plane strain in 2D).
std::vector<double> elasticity_matrix(int d, const Material& mat)
{
    const double e = mat.coefficient, nu = mat.poisson_ratio;
    if (d == 1) return {e};
    const double lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = e / (2.0 * (1.0 + nu));
    if (d == 2) {
        return {lambda + 2 * mu, lambda, 0.0, lambda, lambda + 2 * mu, 0.0, 0.0, 0.0, mu};
    }
    std::vector<double> dm(36, 0.0);
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) dm[a * 6 + b] = lambda;
        dm[a * 6 + a] = lambda + 2 * mu;
        dm[(a + 3) * 6 + (a + 3)] = mu;
    }
    return dm;
}

// Strain-displacement rows for one node: returns strain_count x dim block.
void strain_block(int d, const double* g, double* out)
{
    if (d == 1) {
        out[0] = g[0];
    } else if (d == 2) {
        const double b[3][2] = {{g[0], 0.0}, {0.0, g[1]}, {g[1], g[0]}};
        std::copy(&b[0][0], &b[0][0] + 6, out);
    } else {
        const double b[6][3] = {{g[0], 0, 0}, {0, g[1], 0}, {0, 0, g[2]}, {g[1], g[0], 0}, {0, g[2], g[1]}, {g[2], 0, g[0]}};
        std::copy(&b[0][0], &b[0][0] + 18, out);
    }
}

struct Triplets {
    std::vector<Index> i, j;
    std::vector<double> v;
};

void assemble(const Mesh& mesh, const Material& mat, Triplets& kt, std::vector<double>* load)
{
    if (!(mat.coefficient > 0.0)) throw InvalidArgument("assemble_system: material coefficient must be positive");
    const int d = mesh.dim;
    const int nn = d + 1;
    const int dpn = static_cast<int>(dofs_per_node(mesh.physics, d));
    const int edofs = nn * dpn;
    const int strains = d == 1 ? 1 : d == 2 ? 3 : 6;
    const auto dmat = mesh.physics == Physics::elasticity ? elasticity_matrix(d, mat) : std::vector<double>{};
    std::vector<double> ke(static_cast<std::size_t>(edofs) * edofs);
    std::vector<double> bmat(static_cast<std::size_t>(strains) * edofs);
    std::vector<double> db(static_cast<std::size_t>(strains) * edofs);
    std::vector<double> block(static_cast<std::size_t>(strains) * d);

    for (const auto& el : mesh.elements) {
        for (int a = 0; a < nn; ++a)
            if (el[a] < 0 || el[a] >= mesh.node_count()) throw InvalidArgument("assemble_system: element references invalid node");
        const Simplex s = simplex_geometry(mesh, el);
        if (mesh.physics == Physics::heat) {
            for (int a = 0; a < nn; ++a)
                for (int b = 0; b < nn; ++b) {
                    double g = 0.0;
                    for (int x = 0; x < d; ++x) g += s.grad[a][x] * s.grad[b][x];
                    ke[a * edofs + b] = mat.coefficient * s.volume * g;
                }
        } else {
            for (int a = 0; a < nn; ++a) {
                strain_block(d, s.grad[a], block.data());
                for (int r = 0; r < strains; ++r)
                    for (int c = 0; c < d; ++c) bmat[r * edofs + a * d + c] = block[r * d + c];
            }
            for (int r = 0; r < strains; ++r)
                for (int c = 0; c < edofs; ++c) {
                    double v = 0.0;
                    for (int t = 0; t < strains; ++t) v += dmat[r * strains + t] * bmat[t * edofs + c];
                    db[r * edofs + c] = v;
                }
            for (int a = 0; a < edofs; ++a)
                for (int b = a; b < edofs; ++b) {
                    double v = 0.0;
                    for (int r = 0; r < strains; ++r) v += bmat[r * edofs + a] * db[r * edofs + b];
                    ke[a * edofs + b] = ke[b * edofs + a] = s.volume * v;
                }
        }
        for (int a = 0; a < edofs; ++a) {
            const Index ga = el[a / dpn] * dpn + a % dpn;
            for (int b = 0; b < edofs; ++b) {
                const Index gb = el[b / dpn] * dpn + b % dpn;
                kt.i.push_back(ga);
                kt.j.push_back(gb);
                kt.v.push_back(ke[a * edofs + b]);
            }
            if (load) (*load)[ga] += s.volume / nn * mat.body_force[a % dpn];
        }
    }
}

int face_axis(const Mesh& mesh, std::string_view face, bool& upper)
{
    // Accepts "x0", "x=0", "left" and friends.
    std::string_view f = face;
    if (f == "left") f = "x0";
    if (f == "right") f = "x1";
    char bound = 0;
    if (f.size() == 2) bound = f[1];
    else if (f.size() == 3 && f[1] == '=') bound = f[2];
    if (bound != '0' && bound != '1') throw InvalidArgument("unknown face '" + std::string(face) + "'");
    upper = bound == '1';
    const int axis = f[0] == 'x' ? 0 : f[0] == 'y' ? 1 : f[0] == 'z' ? 2 : -1;
    if (axis < 0 || axis >= mesh.dim) throw InvalidArgument("unknown face '" + std::string(face) + "'");
    return axis;
}

} // namespace

GlobalSystem assemble_system(const Mesh& mesh, const Material& material)
{
    GlobalSystem sys;
    const Index n = mesh.dof_count();
    sys.load.assign(n, 0.0);
    Triplets kt;
    assemble(mesh, material, kt, &sys.load);
    sys.stiffness = SparseCsr::from_triplets(n, n, kt.i, kt.j, kt.v);
    return sys;
}

void reassemble_stiffness(const Mesh& mesh, const Material& material, SparseCsr& stiffness)
{
    Triplets kt;
    assemble(mesh, material, kt, nullptr);
    const SparseCsr fresh = SparseCsr::from_triplets(stiffness.rows(), stiffness.cols(), kt.i, kt.j, kt.v);
    if (fresh.nnz() != stiffness.nnz()) throw InvalidArgument("reassemble_stiffness: pattern changed");
    std::copy(fresh.values().begin(), fresh.values().end(), stiffness.values().begin());
}

std::vector<Index> face_nodes(const Mesh& mesh, std::string_view face)
{
    bool upper = false;
    const int axis = face_axis(mesh, face, upper);
    const double target = mesh.origin[axis] + (upper ? mesh.extent[axis] : 0.0);
    const double tol = 1e-12 * std::max(1.0, std::abs(target) + mesh.extent[axis]);
    std::vector<Index> nodes;
    for (Index v = 0; v < mesh.node_count(); ++v)
        if (std::abs(mesh.coords[v][axis] - target) <= tol) nodes.push_back(v);
    return nodes;
}

std::vector<std::pair<Index, double>> dirichlet_dofs(const Mesh& mesh, std::string_view face, double value)
{
    const Index dpn = static_cast<Index>(dofs_per_node(mesh.physics, mesh.dim));
    std::vector<std::pair<Index, double>> out;
    for (Index v : face_nodes(mesh, face))
        for (Index c = 0; c < dpn; ++c) out.emplace_back(v * dpn + c, value);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> solve_direct_reference(const GlobalSystem& system)
{
    const SparseCsr& k = system.stiffness;
    const Index n = k.rows();
    if (k.cols() != n || static_cast<Index>(system.load.size()) != n) throw InvalidArgument("solve_direct_reference: shape mismatch");
    std::vector<double> u(n, 0.0);
    std::vector<char> fixed(n, 0);
    for (const auto& [dof, value] : system.dirichlet) {
        if (dof < 0 || dof >= n) throw InvalidArgument("solve_direct_reference: Dirichlet DOF out of range");
        fixed[dof] = 1;
        u[dof] = value;
    }
    std::vector<Index> free_index(n, -1);
    Index nf = 0;
    for (Index i = 0; i < n; ++i)
        if (!fixed[i]) free_index[i] = nf++;
    std::vector<double> a(static_cast<std::size_t>(nf) * nf, 0.0);
    std::vector<double> rhs(nf, 0.0);
    const SparseCsr kr = k.with_orientation(Order::row);
    const auto off = kr.offsets();
    const auto idx = kr.indices();
    const auto val = kr.values();
    for (Index i = 0; i < n; ++i) {
        if (fixed[i]) continue;
        const Index fi = free_index[i];
        rhs[fi] += system.load[i];
        for (Index p = off[i]; p < off[i + 1]; ++p) {
            const Index j = idx[p];
            if (fixed[j]) rhs[fi] -= val[p] * u[j];
            else a[static_cast<std::size_t>(fi) * nf + free_index[j]] += val[p];
        }
    }
    try {
        dense_cholesky_in_place(a, nf, 1e-12);
    } catch (const NotSpdError& e) {
        throw NotSpdError(std::string("solve_direct_reference: constrained system is singular (") + e.what() + ")", e.pivot());
    }
    dense_cholesky_solve(a, nf, rhs);
    for (Index i = 0; i < n; ++i)
        if (!fixed[i]) u[i] = rhs[free_index[i]];
    return u;
}

} // namespace feti
