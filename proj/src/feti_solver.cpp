#include "feti/feti_solver.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <utility>

namespace feti {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Body>
void for_subdomains(Index count, Body&& body)
{
    std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic, 1)
    for (Index i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void orthonormalize(DenseMat& r)
{
    const Index n = r.rows();
    for (Index j = 0; j < r.cols(); ++j) {
        std::span<double> cj(r.data().data() + static_cast<std::size_t>(j) * n, n);
        const double original = norm2(cj);
        for (int pass = 0; pass < 2; ++pass)
            for (Index i = 0; i < j; ++i) {
                std::span<const double> ci(r.data().data() + static_cast<std::size_t>(i) * n, n);
                const double h = dot(ci, cj);
                for (Index k = 0; k < n; ++k) cj[k] -= h * ci[k];
            }
        const double len = norm2(cj);
        if (!(len > 1e-10 * original)) throw SolverError("build_kernel: rigid modes are linearly dependent");
        for (double& v : cj) v /= len;
    }
}

double values_norm(const SparseCsr& k)
{
    return norm2(k.values());
}

} // namespace

DenseMat build_kernel(Physics physics, const Mesh& mesh, const SparseCsr* k)
{
    const int d = mesh.dim;
    const Index nodes = mesh.node_count();
    const Index dpn = static_cast<Index>(dofs_per_node(physics, d));
    const Index n = nodes * dpn;
    if (n == 0) throw InvalidArgument("build_kernel: empty mesh");

    DenseMat r;
    if (physics == Physics::heat) {
        r = DenseMat(n, 1, Order::col);
        for (Index i = 0; i < n; ++i) r(i, 0) = 1.0;
    } else {
        std::array<double, 3> c{0.0, 0.0, 0.0};
        for (const auto& x : mesh.coords)
            for (int a = 0; a < 3; ++a) c[a] += x[a] / nodes;
        const Index modes = d == 1 ? 1 : d == 2 ? 3 : 6;
        r = DenseMat(n, modes, Order::col);
        for (Index v = 0; v < nodes; ++v) {
            const double x = mesh.coords[v][0] - c[0];
            const double y = mesh.coords[v][1] - c[1];
            const double z = mesh.coords[v][2] - c[2];
            for (Index a = 0; a < d; ++a) r(v * dpn + a, a) = 1.0;
            if (d == 2) {
                r(v * dpn + 0, 2) = -y;
                r(v * dpn + 1, 2) = x;
            } else if (d == 3) {
                r(v * dpn + 1, 3) = -z;
                r(v * dpn + 2, 3) = y;
                r(v * dpn + 0, 4) = z;
                r(v * dpn + 2, 4) = -x;
                r(v * dpn + 0, 5) = -y;
                r(v * dpn + 1, 5) = x;
            }
        }
    }
    orthonormalize(r);

    if (k) {
        if (k->rows() != n || k->cols() != n) throw InvalidArgument("build_kernel: stiffness size does not match the mesh");
        const DenseMat kr = sparse_dense_multiply(*k, r);
        const double ratio = frobenius_norm(kr) / values_norm(*k);
        if (!(ratio <= 1e-10)) {
            std::ostringstream os;
            os << "build_kernel: ||K R|| / ||K|| = " << ratio << " exceeds 1e-10";
            throw SolverError(os.str());
        }
    }
    return r;
}

DualSystem assemble_dual_system(const FetiProblem& problem, DualOperator& op)
{
    if (!op.ready()) throw ContractViolation("assemble_dual_system: dual operator is not preprocessed");
    const Index count = problem.subdomain_count();
    const Index m = problem.multiplier_count();
    DualSystem sys;
    sys.kernel_offsets.assign(count + 1, 0);
    for (Index i = 0; i < count; ++i) sys.kernel_offsets[i + 1] = sys.kernel_offsets[i] + problem.subdomains[i].kernel.cols();
    const Index kdim = sys.kernel_offsets[count];
    sys.g = DenseMat(m, kdim, Order::col);
    sys.e.assign(kdim, 0.0);
    sys.d.assign(m, 0.0);

    std::vector<std::vector<double>> local_d(count);
    for_subdomains(count, [&](Index i) {
        const Subdomain& sd = problem.subdomains[i];
        const SparseCsr& b = problem.constraints.local_b[i];
        const auto& mults = problem.constraints.local_multipliers[i];
        const Index n = sd.dofs();
        std::vector<double> gl(b.rows());
        for (Index j = 0; j < sd.kernel.cols(); ++j) {
            std::span<const double> rj(sd.kernel.data().data() + static_cast<std::size_t>(j) * n, n);
            sparse_apply(b, rj, gl);
            const Index col = sys.kernel_offsets[i] + j;
            for (std::size_t r = 0; r < mults.size(); ++r) sys.g(mults[r], col) = gl[r];
            sys.e[col] = dot(rj, sd.load);
        }
        std::vector<double> x(n);
        op.solve_primal(i, sd.load, x);
        local_d[i].assign(b.rows(), 0.0);
        sparse_apply(b, x, local_d[i]);
    });
    for (Index i = 0; i < count; ++i) {
        const auto& mults = problem.constraints.local_multipliers[i];
        for (std::size_t r = 0; r < mults.size(); ++r) sys.d[mults[r]] += local_d[i][r];
    }
    for (Index j = 0; j < m; ++j) sys.d[j] -= problem.constraints.rhs[j];

    DenseMat c(kdim, kdim, Order::row);
    syrk_upper(std::as_const(sys.g).view(), c.view());
    for (Index i = 0; i < kdim; ++i)
        for (Index j = 0; j < i; ++j) c(i, j) = c(j, i);
    try {
        sys.gtg = DenseCholesky(c);
    } catch (const NotSpdError& e) {
        throw SolverError(std::string("assemble_dual_system: G^T G is not SPD (defective constraints): ") + e.what());
    }
    return sys;
}

void apply_gt(const DualSystem& sys, std::span<const double> x, std::span<double> y)
{
    const Index m = sys.multipliers();
    for (Index j = 0; j < sys.coarse_size(); ++j)
        y[j] = dot(std::span<const double>(sys.g.data().data() + static_cast<std::size_t>(j) * m, m), x);
}

void project(const DualSystem& sys, std::span<const double> x, std::span<double> out)
{
    const Index m = sys.multipliers();
    const Index k = sys.coarse_size();
    if (static_cast<Index>(x.size()) != m || static_cast<Index>(out.size()) != m)
        throw InvalidArgument("project: vector size does not match the multiplier count");
    std::vector<double> coarse(k);
    apply_gt(sys, x, coarse);
    sys.gtg.solve_in_place(coarse);
    if (out.data() != x.data()) std::copy(x.begin(), x.end(), out.begin());
    for (Index j = 0; j < k; ++j) {
        const double* gj = sys.g.data().data() + static_cast<std::size_t>(j) * m;
        for (Index i = 0; i < m; ++i) out[i] -= gj[i] * coarse[j];
    }
}

std::vector<double> project(const DualSystem& sys, std::span<const double> x)
{
    std::vector<double> out(x.size());
    project(sys, x, out);
    return out;
}

void apply_preconditioner(Preconditioner kind, const FetiProblem& problem, std::span<const double> w,
                          std::span<double> y)
{
    if (w.size() != y.size()) throw InvalidArgument("apply_preconditioner: size mismatch");
    if (kind == Preconditioner::none) {
        std::copy(w.begin(), w.end(), y.begin());
        return;
    }
    std::fill(y.begin(), y.end(), 0.0);
    std::vector<double> wl, t, s, yl;
    for (Index i = 0; i < problem.subdomain_count(); ++i) {
        const SparseCsr& b = problem.constraints.local_b[i];
        const auto& mults = problem.constraints.local_multipliers[i];
        const Index n = b.cols();
        wl.resize(mults.size());
        yl.resize(mults.size());
        t.resize(n);
        s.resize(n);
        for (std::size_t r = 0; r < mults.size(); ++r) wl[r] = w[mults[r]];
        sparse_apply(b, wl, t, Transpose::yes);
        sparse_apply(problem.subdomains[i].stiffness, t, s);
        sparse_apply(b, s, yl);
        for (std::size_t r = 0; r < mults.size(); ++r) y[mults[r]] += yl[r];
    }
}

PcpgResult pcpg(const DualSystem& sys, DualOperator& op, const PcpgConfig& config)
{
    const Index m = sys.multipliers();
    const FetiProblem& problem = op.problem();
    PcpgResult res;
    std::vector<double> coarse(sys.e);
    sys.gtg.solve_in_place(coarse);
    res.lambda.assign(m, 0.0);
    for (Index j = 0; j < sys.coarse_size(); ++j)
        for (Index i = 0; i < m; ++i) res.lambda[i] += sys.g(i, j) * coarse[j];

    std::vector<double> r(m), w(m), y(m), p(m), q(m), mw(m), gt(sys.coarse_size());
    auto apply_f = [&](std::span<const double> x, std::span<double> out) {
        const auto start = Clock::now();
        op.apply(x, out);
        res.apply_seconds += seconds_since(start);
        ++res.applies;
    };
    auto feasibility = [&] {
        apply_gt(sys, res.lambda, gt);
        for (Index j = 0; j < sys.coarse_size(); ++j) gt[j] -= sys.e[j];
        return norm2(gt);
    };
    auto precondition = [&] {
        if (config.precond == Preconditioner::none) {
            y = w;
            return;
        }
        apply_preconditioner(config.precond, problem, w, mw);
        project(sys, mw, y);
    };
    auto record = [&](double wn) {
        res.history.push_back(wn);
        res.feasibility.push_back(feasibility());
        if (static_cast<int>(res.iterates.size()) <= config.record_iterates) res.iterates.push_back(res.lambda);
    };

    apply_f(res.lambda, q);
    for (Index i = 0; i < m; ++i) r[i] = sys.d[i] - q[i];
    project(sys, r, w);
    precondition();
    p = y;
    res.initial_norm = norm2(w);
    record(res.initial_norm);
    if (res.initial_norm == 0.0) return res;

    double wy = dot(w, y);
    for (int k = 1;; ++k) {
        if (k > config.maxit) {
            std::ostringstream os;
            os << "pcpg: no convergence in " << config.maxit << " iterations (relative residual "
               << res.relative_residual() << ")";
            throw SolverError(os.str());
        }
        apply_f(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) {
            std::ostringstream os;
            os << "pcpg: breakdown at iteration " << k << " (p^T F p = " << pq << ")";
            throw SolverError(os.str());
        }
        const double delta = wy / pq;
        for (Index i = 0; i < m; ++i) {
            res.lambda[i] += delta * p[i];
            r[i] -= delta * q[i];
        }
        project(sys, r, w);
        precondition();
        const double wn = norm2(w);
        res.iterations = k;
        record(wn);
        if (wn <= config.tol * res.initial_norm) break;
        const double wy_next = dot(w, y);
        const double beta = wy_next / wy;
        wy = wy_next;
        for (Index i = 0; i < m; ++i) p[i] = y[i] + beta * p[i];
    }
    return res;
}

Solution recover_solution(const FetiProblem& problem, DualOperator& op, const DualSystem& sys,
                          std::span<const double> lambda, double tol, double initial_norm)
{
    const Index m = sys.multipliers();
    const Index count = problem.subdomain_count();
    if (static_cast<Index>(lambda.size()) != m) throw InvalidArgument("recover_solution: lambda size mismatch");

    std::vector<double> r(m);
    op.apply(lambda, r);
    for (Index i = 0; i < m; ++i) r[i] = sys.d[i] - r[i];
    Solution sol;
    sol.alpha.assign(sys.coarse_size(), 0.0);
    apply_gt(sys, r, sol.alpha);
    sys.gtg.solve_in_place(sol.alpha);
    for (double& a : sol.alpha) a = -a;

    sol.u.resize(count);
    std::vector<std::vector<double>> bu(count);
    std::vector<double> primal_sq(count, 0.0);
    std::vector<double> btl_sq(count, 0.0);
    for_subdomains(count, [&](Index i) {
        const Subdomain& sd = problem.subdomains[i];
        const SparseCsr& b = problem.constraints.local_b[i];
        const auto& mults = problem.constraints.local_multipliers[i];
        const Index n = sd.dofs();
        std::vector<double> li(mults.size()), btl(n), rhs(n);
        for (std::size_t k = 0; k < mults.size(); ++k) li[k] = lambda[mults[k]];
        sparse_apply(b, li, btl, Transpose::yes);
        for (Index k = 0; k < n; ++k) rhs[k] = sd.load[k] - btl[k];
        std::vector<double>& u = sol.u[i];
        u.assign(n, 0.0);
        op.solve_primal(i, rhs, u);
        for (Index j = 0; j < sd.kernel.cols(); ++j) {
            const double a = sol.alpha[sys.kernel_offsets[i] + j];
            for (Index k = 0; k < n; ++k) u[k] += sd.kernel(k, j) * a;
        }
        std::vector<double> ku = sparse_apply(sd.stiffness, u);
        double sq = 0.0;
        for (Index k = 0; k < n; ++k) {
            const double v = ku[k] - rhs[k];
            sq += v * v;
        }
        primal_sq[i] = sq;
        btl_sq[i] = dot(btl, btl);
        bu[i] = sparse_apply(b, u);
    });

    std::vector<double> cres(m, 0.0);
    for (Index i = 0; i < count; ++i) {
        const auto& mults = problem.constraints.local_multipliers[i];
        for (std::size_t k = 0; k < mults.size(); ++k) cres[mults[k]] += bu[i][k];
    }
    for (Index j = 0; j < m; ++j) cres[j] -= problem.constraints.rhs[j];
    double f_sq = 0.0, btl_total = 0.0, primal_total = 0.0;
    for (Index i = 0; i < count; ++i) {
        f_sq += dot(problem.subdomains[i].load, problem.subdomains[i].load);
        btl_total += btl_sq[i];
        primal_total += primal_sq[i];
    }
    sol.constraint_residual = norm2(cres);
    sol.constraint_bound = 10.0 * tol * std::max({norm2(problem.constraints.rhs), initial_norm, norm2(sys.d)});
    sol.primal_residual = std::sqrt(primal_total);
    sol.primal_bound = 10.0 * tol * std::max(std::sqrt(f_sq), std::sqrt(btl_total));

    if (!(sol.constraint_residual <= sol.constraint_bound) || !(sol.primal_residual <= sol.primal_bound)) {
        std::ostringstream os;
        os << "recover_solution: residual check failed (||Bu - c|| = " << sol.constraint_residual << " vs "
           << sol.constraint_bound << ", ||Ku + B^T lambda - f|| = " << sol.primal_residual << " vs " << sol.primal_bound
           << ")";
        throw SolverError(os.str());
    }
    return sol;
}

StepRun run_steps(FetiProblem& problem, int n_steps, const std::function<double(int)>& coefficient,
                  const DualOpConfig& op_config, const PcpgConfig& pcpg_config, const PreprocessHook& hook)
{
    if (n_steps < 1) throw InvalidArgument("run_steps: n_steps must be at least 1");
    DualOperator op(problem, op_config);
    op.prepare();
    StepRun run;
    for (int step = 0; step < n_steps; ++step) {
        StepReport rep;
        rep.step = step;
        rep.coefficient = coefficient ? coefficient(step) : problem.spec.material.coefficient;
        problem.set_coefficient(rep.coefficient);

        if (hook) hook(step, false);
        const auto start = Clock::now();
        op.preprocess();
        rep.t_preprocess_ms = seconds_since(start) * 1e3;
        if (hook) hook(step, true);

        const DualSystem sys = assemble_dual_system(problem, op);
        PcpgResult res = pcpg(sys, op, pcpg_config);
        Solution sol = recover_solution(problem, op, sys, res.lambda, pcpg_config.tol, res.initial_norm);

        rep.iterations = res.iterations;
        rep.t_apply_ms = res.applies > 0 ? res.apply_seconds * 1e3 / res.applies : 0.0;
        rep.residual = res.relative_residual();
        rep.constraint_residual = sol.constraint_residual;
        rep.primal_residual = sol.primal_residual;
        double usq = 0.0;
        for (const auto& u : sol.u) usq += dot(u, u);
        rep.u_norm = std::sqrt(usq);
        rep.lambda_norm = norm2(res.lambda);
        run.reports.push_back(rep);
        run.lambda = std::move(res.lambda);
        run.solution = std::move(sol);
    }
    run.symbolic_count = op.symbolic_count();
    run.numeric_count = op.numeric_count();
    return run;
}

} // namespace feti
