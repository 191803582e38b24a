#include "feti/bench.hpp"

#include "feti/cholesky.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace feti {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ConfigSummary summarize(std::span<const Measurement> reps)
{
    ConfigSummary s;
    s.ok = !reps.empty() && std::all_of(reps.begin(), reps.end(), [](const Measurement& m) { return m.ok; });
    if (!s.ok) return s;
    std::vector<double> pre, app;
    for (const Measurement& m : reps) {
        pre.push_back(m.t_preprocess_ms);
        app.push_back(m.t_apply_ms);
    }
    s.median = {median(pre), median(app)};
    s.iterations = reps.back().iterations;
    return s;
}

} // namespace

bool MeasurementSet::iterations_consistent() const
{
    int seen = -1;
    for (const Measurement& m : rows) {
        if (!m.ok) continue;
        if (seen >= 0 && m.iterations != seen) return false;
        seen = m.iterations;
    }
    return true;
}

std::vector<double> solve_direct_sparse(const GlobalSystem& system)
{
    const SparseCsr k = system.stiffness.with_orientation(Order::row);
    const Index n = k.rows();
    std::vector<double> u(n, 0.0);
    std::vector<char> fixed(n, 0);
    for (const auto& [dof, value] : system.dirichlet) {
        fixed[dof] = 1;
        u[dof] = value;
    }
    std::vector<Index> reduced(n, -1);
    Index free_count = 0;
    for (Index i = 0; i < n; ++i)
        if (!fixed[i]) reduced[i] = free_count++;

    std::vector<Index> ti, tj;
    std::vector<double> tv;
    std::vector<double> rhs(free_count, 0.0);
    for (Index i = 0; i < n; ++i) {
        if (fixed[i]) continue;
        rhs[reduced[i]] = system.load[i];
        for (Index p = k.offsets()[i]; p < k.offsets()[i + 1]; ++p) {
            const Index j = k.indices()[p];
            if (fixed[j]) {
                rhs[reduced[i]] -= k.values()[p] * u[j];
            } else {
                ti.push_back(reduced[i]);
                tj.push_back(reduced[j]);
                tv.push_back(k.values()[p]);
            }
        }
    }
    const SparseCsr kff = SparseCsr::from_triplets(free_count, free_count, ti, tj, tv);
    auto symbolic = std::make_shared<const SymbolicFactor>(symbolic_factorize(kff));
    const CholFactor factor = numeric_factorize(symbolic, kff.values());
    const std::vector<double> x = factor.solve(rhs);
    for (Index i = 0; i < n; ++i)
        if (!fixed[i]) u[i] = x[reduced[i]];
    return u;
}

std::optional<long long> amortization_point(Timing implicit, Timing explicit_op)
{
    const double num = explicit_op.t_preprocess - implicit.t_preprocess;
    const double den = implicit.t_apply - explicit_op.t_apply;
    if (den > 0.0) return num <= 0.0 ? 0LL : static_cast<long long>(std::ceil(num / den));
    if (den == 0.0 && num <= 0.0) return 0LL;
    return std::nullopt;
}

std::string format_amortization(std::optional<long long> n)
{
    return n ? std::to_string(*n) : std::string("never");
}

FetiProblem extract_subdomain(const FetiProblem& problem, Index subdomain)
{
    if (subdomain < 0 || subdomain >= problem.subdomain_count()) throw InvalidArgument("extract_subdomain: index out of range");
    FetiProblem p;
    p.spec = problem.spec;
    p.spec.subdomains_per_side = 1;
    p.spec.clusters = 1;
    p.subdomains.push_back(problem.subdomains[subdomain]);
    Subdomain& sd = p.subdomains.front();
    const Index n = sd.dofs();
    std::iota(sd.geometry.dof_map.begin(), sd.geometry.dof_map.end(), 0);
    std::iota(sd.geometry.node_map.begin(), sd.geometry.node_map.end(), 0);
    p.global_mesh = sd.geometry.mesh;
    p.partition.global_dofs = n;
    p.partition.subdomains.push_back(sd.geometry);

    const auto& mults = problem.constraints.local_multipliers[subdomain];
    const Index m = static_cast<Index>(mults.size());
    std::vector<Index> local(m);
    std::iota(local.begin(), local.end(), 0);
    p.constraints.multiplier_count = m;
    for (Index g : mults) {
        p.constraints.rhs.push_back(problem.constraints.rhs[g]);
        p.constraints.kind.push_back(problem.constraints.kind[g]);
    }
    p.constraints.local_b.push_back(problem.constraints.local_b[subdomain]);
    p.constraints.local_multipliers.push_back(local);
    p.layout.cluster_subdomains = {{0}};
    p.layout.cluster_multipliers = {local};
    p.layout.subdomain_cluster = {0};
    p.layout.scatter_map = {local};
    p.values_version = problem.values_version;
    return p;
}

Index representative_subdomain(const FetiProblem& problem)
{
    Index best = 0;
    for (Index i = 1; i < problem.subdomain_count(); ++i)
        if (problem.constraints.local_multipliers[i].size() > problem.constraints.local_multipliers[best].size()) best = i;
    return best;
}

Timing measure_config(const FetiProblem& problem, const DualOpConfig& config, int applies)
{
    DualOperator op(problem, config);
    op.prepare();
    const auto start = Clock::now();
    op.preprocess();
    Timing t;
    t.t_preprocess = ms_since(start);
    const Index m = problem.multiplier_count();
    std::vector<double> p(m), q(m);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : p) v = dist(rng);
    const int count = std::max(applies, 1);
    const auto apply_start = Clock::now();
    for (int k = 0; k < count; ++k) op.apply(p, q);
    t.t_apply = ms_since(apply_start) / count;
    return t;
}

DualOpConfig autotune(const FetiProblem& problem, std::span<const DualOpConfig> grid, double k,
                      const AutotuneOptions& options)
{
    if (grid.empty()) throw InvalidArgument("autotune: empty candidate grid");
    if (k < 0.0) throw InvalidArgument("autotune: iteration estimate must be nonnegative");
    std::optional<FetiProblem> sample;
    if (!options.measure) sample = extract_subdomain(problem, representative_subdomain(problem));

    std::optional<std::size_t> best;
    double best_cost = 0.0;
    std::string failures;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Timing t;
        try {
            t = options.measure ? options.measure(grid[i], i) : measure_config(*sample, grid[i], options.applies);
        } catch (const std::exception& e) {
            failures += "\n  " + describe(grid[i]) + ": " + e.what();
            continue;
        }
        const double cost = t.t_preprocess + k * t.t_apply;
        if (!best || cost < best_cost) {
            best = i;
            best_cost = cost;
        }
    }
    if (!best) throw SolverError("autotune: every candidate failed" + failures);
    return grid[*best];
}

MeasurementSet run_experiment(const ExperimentConfig& config)
{
    if (config.repetitions < 1) throw InvalidArgument("run_experiment: repetitions must be at least 1");
    if (config.grid.empty()) throw InvalidArgument("run_experiment: empty configuration grid");
    if (config.steps < 1) throw InvalidArgument("run_experiment: steps must be at least 1");

    MeasurementSet set;
    set.grid = config.grid;
    set.problem = config.problem;
    FetiProblem problem = build_problem(config.problem);
    set.subdomains = problem.subdomain_count();
    set.dofs_per_subdomain = problem.subdomains.front().dofs();

    std::vector<double> coefficients(config.steps, config.problem.material.coefficient);
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    for (int s = 1; s < config.steps; ++s) coefficients[s] = config.problem.material.coefficient * scale(rng);

    problem.set_coefficient(coefficients.back());
    const std::vector<double> reference = solve_direct_sparse(problem.global_system());
    const double ref_norm = norm2(reference);

    auto run_point = [&](DualOpConfig c, std::size_t index, int rep) {
        Measurement m;
        m.config_index = index;
        m.rep = rep;
        if (config.pool_bytes > 0) c.pool_bytes = config.pool_bytes;
        try {
            const StepRun run = run_steps(problem, config.steps, [&](int s) { return coefficients[s]; }, c, config.pcpg);
            const std::vector<double> u = to_global(problem, run.solution.u);
            double diff = 0.0;
            for (std::size_t i = 0; i < u.size(); ++i) diff += (u[i] - reference[i]) * (u[i] - reference[i]);
            m.error_vs_direct = std::sqrt(diff) / (ref_norm > 0.0 ? ref_norm : 1.0);
            if (!(m.error_vs_direct <= config.verify_tol)) {
                std::ostringstream os;
                os << "solution differs from the direct solve by " << m.error_vs_direct;
                m.error = os.str();
                return m;
            }
            double pre = 0.0;
            for (const StepReport& r : run.reports) pre += r.t_preprocess_ms;
            m.t_preprocess_ms = pre / static_cast<double>(run.reports.size());
            double app = 0.0;
            for (const StepReport& r : run.reports) app += r.t_apply_ms;
            m.t_apply_ms = app / static_cast<double>(run.reports.size());
            m.iterations = run.reports.back().iterations;
            m.residual = run.reports.back().residual;
            m.ok = true;
        } catch (const std::exception& e) {
            m.error = e.what();
        }
        return m;
    };

    for (std::size_t i = 0; i < config.grid.size(); ++i) {
        for (int rep = 0; rep < config.repetitions; ++rep) set.rows.push_back(run_point(config.grid[i], i, rep));
        set.summary.push_back(
            summarize(std::span<const Measurement>(set.rows).subspan(set.rows.size() - config.repetitions)));
    }

    const auto implicit_it = std::find_if(config.grid.begin(), config.grid.end(),
                                          [](const DualOpConfig& c) { return c.strategy == Strategy::implicit; });
    if (implicit_it != config.grid.end()) {
        set.implicit_baseline = set.summary[implicit_it - config.grid.begin()];
    } else {
        DualOpConfig base = config.grid.front();
        base.strategy = Strategy::implicit;
        std::vector<Measurement> reps;
        for (int rep = 0; rep < config.repetitions; ++rep) reps.push_back(run_point(base, config.grid.size(), rep));
        set.implicit_baseline = summarize(reps);
    }
    return set;
}

const char* const csv_header =
    "physics,dim,dofs_per_subdomain,n_subdomains,strategy,path,fwd_storage,bwd_storage,fwd_order,bwd_order,"
    "rhs_order,staging,rep,t_preprocess_ms,t_apply_ms,iterations,residual,amortization_vs_implicit";

void write_csv(std::ostream& out, const MeasurementSet& set)
{
    out << csv_header << '\n';
    for (const Measurement& m : set.rows) {
        const DualOpConfig& c = set.grid[m.config_index];
        out << to_string(set.problem.physics) << ',' << set.problem.dim << ',' << set.dofs_per_subdomain << ','
            << set.subdomains << ',' << to_string(c.strategy) << ',' << to_string(c.path) << ','
            << to_string(c.forward_storage) << ',' << to_string(c.backward_storage) << ','
            << to_string(c.forward_order) << ',' << to_string(c.backward_order) << ',' << to_string(c.rhs_order) << ','
            << to_string(c.staging) << ',' << m.rep << ',';
        if (!m.ok) {
            out << ",,,failed,\n";
            continue;
        }
        std::string amort = "-";
        const ConfigSummary& s = set.summary[m.config_index];
        if (c.strategy != Strategy::implicit && s.ok && set.implicit_baseline && set.implicit_baseline->ok)
            amort = format_amortization(amortization_point(set.implicit_baseline->median, s.median));
        out << std::setprecision(6) << m.t_preprocess_ms << ',' << m.t_apply_ms << ',' << m.iterations << ','
            << std::setprecision(3) << m.residual << ',' << amort << '\n';
    }
}

} // namespace feti
