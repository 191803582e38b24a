// One line per acceptance criterion; exits nonzero when any criterion fails.
#include "feti/bench.hpp"
#include "feti/feti_solver.hpp"
#include "feti/pool.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <map>
#include <new>
#include <random>
#include <sstream>
#include <thread>

namespace {
std::atomic<bool> g_counting{false};
std::atomic<long> g_allocations{0};
}

void* operator new(std::size_t size)
{
    if (g_counting.load(std::memory_order_relaxed)) g_allocations.fetch_add(1, std::memory_order_relaxed);
    if (void* p = std::malloc(size ? size : 1)) return p;
    throw std::bad_alloc();
}
void* operator new[](std::size_t size) { return operator new(size); }
void* operator new(std::size_t size, std::align_val_t align)
{
    if (g_counting.load(std::memory_order_relaxed)) g_allocations.fetch_add(1, std::memory_order_relaxed);
    const std::size_t a = static_cast<std::size_t>(align);
    if (void* p = std::aligned_alloc(a, (size + a - 1) / a * a)) return p;
    throw std::bad_alloc();
}
void* operator new[](std::size_t size, std::align_val_t align) { return operator new(size, align); }
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }
void operator delete(void* p, std::align_val_t) noexcept { std::free(p); }
void operator delete[](void* p, std::align_val_t) noexcept { std::free(p); }
void operator delete(void* p, std::size_t, std::align_val_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t, std::align_val_t) noexcept { std::free(p); }

using namespace feti;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
    enum Kind { pass, fail, warn } kind = fail;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Verdict()>& check)
{
    Verdict v;
    try {
        v = check();
    } catch (const std::exception& e) {
        v = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = v.kind == Verdict::pass ? "PASS" : v.kind == Verdict::warn ? "WARN" : "FAIL";
    if (v.kind == Verdict::fail) ++failures;
    std::printf("%s %2d %s: %s\n", tag, id, title, v.detail.c_str());
    std::fflush(stdout);
}

Verdict verdict(bool ok, const std::ostringstream& os)
{
    return {ok ? Verdict::pass : Verdict::fail, os.str()};
}

ProblemSpec make_spec(Physics physics, int dim, Index cells, Index subs)
{
    ProblemSpec s;
    s.physics = physics;
    s.dim = dim;
    s.cells_per_subdomain = cells;
    s.subdomains_per_side = subs;
    s.dirichlet_face = "x0";
    return s;
}

const ProblemSpec problem1 = make_spec(Physics::heat, 2, 8, 4);
const ProblemSpec problem2 = make_spec(Physics::heat, 3, 4, 2);
const ProblemSpec problem3 = make_spec(Physics::elasticity, 2, 4, 2);

double relative_error(const std::vector<double>& a, const std::vector<double>& b)
{
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(diff) / std::max(norm2(b), 1e-300);
}

double relative_error(const DenseMat& a, const DenseMat& b)
{
    double s = 0.0;
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    return std::sqrt(s) / std::max(frobenius_norm(b), 1e-300);
}

struct EndToEnd {
    double error = 0.0;
    double seconds = 0.0;
    int iterations = 0;
};

EndToEnd solve_and_compare(const ProblemSpec& spec, double tol)
{
    const auto start = Clock::now();
    const FetiProblem p = build_problem(spec);
    DualOperator op(p, DualOpConfig{});
    op.prepare();
    op.preprocess();
    const DualSystem sys = assemble_dual_system(p, op);
    PcpgConfig config;
    config.tol = tol;
    const PcpgResult r = pcpg(sys, op, config);
    const Solution sol = recover_solution(p, op, sys, r.lambda, tol, r.initial_norm);
    const std::vector<double> u = to_global(p, sol.u);
    EndToEnd out;
    out.seconds = seconds_since(start);
    out.iterations = r.iterations;
    out.error = relative_error(u, solve_direct_reference(p.global_system()));
    return out;
}

Verdict end_to_end(const ProblemSpec& spec, double time_limit)
{
    const EndToEnd e = solve_and_compare(spec, 1e-9);
    std::ostringstream os;
    os << "rel error " << e.error << " (<= 1e-6), " << e.iterations << " iterations, " << e.seconds << " s (< "
       << time_limit << " s)";
    return verdict(e.error <= 1e-6 && e.seconds < time_limit, os);
}

Verdict criterion3()
{
    const FetiProblem p = build_problem(problem3);
    double worst_kernel = 0.0;
    bool dims_ok = true;
    for (const Subdomain& sd : p.subdomains) {
        dims_ok = dims_ok && sd.kernel.cols() == 3;
        const DenseMat kr = sparse_dense_multiply(sd.stiffness, sd.kernel);
        worst_kernel = std::max(worst_kernel, frobenius_norm(kr) / norm2(sd.stiffness.values()));
    }
    const EndToEnd e = solve_and_compare(problem3, 1e-9);
    std::ostringstream os;
    os << "kernel dim 3 on all " << p.subdomain_count() << " subdomains: " << (dims_ok ? "yes" : "no")
       << ", max ||KR||/||K|| " << worst_kernel << ", rel error " << e.error;
    return verdict(dims_ok && worst_kernel <= 1e-10 && e.error <= 1e-6, os);
}

Verdict criterion4()
{
    const FetiProblem p = build_problem(problem1);
    std::vector<PcpgResult> runs;
    for (auto [strategy, path] : {std::pair{Strategy::implicit, Path::trsm}, {Strategy::explicit_assembly, Path::trsm},
                                  {Strategy::explicit_assembly, Path::syrk}, {Strategy::schur_oracle, Path::trsm}}) {
        DualOpConfig c;
        c.strategy = strategy;
        c.path = path;
        DualOperator op(p, c);
        op.prepare();
        op.preprocess();
        const DualSystem sys = assemble_dual_system(p, op);
        PcpgConfig pc;
        pc.tol = 1e-9;
        pc.record_iterates = 20;
        runs.push_back(pcpg(sys, op, pc));
    }
    double worst = 0.0;
    bool same_iterations = true;
    for (std::size_t a = 0; a < runs.size(); ++a)
        for (std::size_t b = a + 1; b < runs.size(); ++b) {
            same_iterations = same_iterations && runs[a].iterations == runs[b].iterations;
            const std::size_t k = std::min(runs[a].iterates.size(), runs[b].iterates.size());
            for (std::size_t it = 0; it < k; ++it)
                worst = std::max(worst, relative_error(runs[a].iterates[it], runs[b].iterates[it]));
        }
    std::ostringstream os;
    os << "max pairwise relative iterate difference " << worst << " (<= 1e-8) over "
       << std::min<std::size_t>(21, runs[0].iterates.size()) << " iterates; iterations";
    for (const auto& r : runs) os << ' ' << r.iterations;
    return verdict(worst <= 1e-8 && same_iterations, os);
}

Verdict criterion5()
{
    // 3D elasticity, 4^3 cells per subdomain: 375 DOFs each.
    const FetiProblem p = build_problem(make_spec(Physics::elasticity, 3, 4, 2));
    const Index rep = representative_subdomain(p);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(p.multiplier_count());
    for (double& v : x) v = u(rng);

    DualOpConfig base;
    base.strategy = Strategy::explicit_assembly;
    std::optional<DenseMat> f_ref;
    std::optional<std::vector<double>> q_ref;
    double worst_f = 0.0, worst_q = 0.0;
    int count = 0;
    for (Staging staging : {Staging::per_subdomain, Staging::cluster_wide}) {
        base.staging = staging;
        for (Path path : {Path::trsm, Path::syrk})
            for (const DualOpConfig& c : explicit_grid(path, base)) {
                DualOperator op(p, c);
                op.prepare();
                op.preprocess();
                std::vector<double> q(x.size());
                op.apply(x, q);
                DenseMat f = op.local_operator(rep);
                if (!f_ref) {
                    f_ref = std::move(f);
                    q_ref = q;
                } else {
                    worst_f = std::max(worst_f, relative_error(f, *f_ref));
                    worst_q = std::max(worst_q, relative_error(q, *q_ref));
                }
                ++count;
            }
    }
    std::ostringstream os;
    os << count << " configurations on a " << p.subdomains[rep].dofs() << "-DOF subdomain: max rel diff F " << worst_f
       << ", q " << worst_q << " (<= 1e-12)";
    return verdict(p.subdomains[rep].dofs() >= 300 && count == 80 && worst_f <= 1e-12 && worst_q <= 1e-12, os);
}

Verdict criterion6()
{
    double worst = 0.0;
    int checked = 0;
    for (const ProblemSpec& spec : {problem1, problem2, problem3}) {
        const FetiProblem p = build_problem(spec);
        DualOpConfig c;
        c.strategy = Strategy::explicit_assembly;
        DualOperator op(p, c);
        op.prepare();
        op.preprocess();
        for (Index i = 0; i < p.subdomain_count(); ++i) {
            if (p.subdomains[i].dofs() > 500) continue;
            SparseCsr kreg = op.regularized_pattern(i);
            std::ranges::copy(op.regularized_values(i), kreg.values().begin());
            const DenseMat oracle = schur_complement_oracle(kreg, p.constraints.local_b[i]);
            const DenseMat f = assemble_explicit_local(op.factor(i), p.constraints.local_b[i], c);
            worst = std::max(worst, relative_error(f, oracle));
            ++checked;
        }
    }
    std::ostringstream os;
    os << checked << " subdomains, max rel diff " << worst << " (<= 1e-10)";
    return verdict(checked > 0 && worst <= 1e-10, os);
}

Verdict criterion7()
{
    const FetiProblem p = build_problem(problem3);
    DualOperator op(p, DualOpConfig{});
    op.prepare();
    op.preprocess();
    const DualSystem sys = assemble_dual_system(p, op);
    const Index m = sys.multipliers(), k = sys.coarse_size();
    Eigen::MatrixXd g(m, k);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < k; ++j) g(i, j) = sys.g(i, j);
    const double g_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(g).singularValues()(0);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst_idem = 0.0, worst_pg = 0.0;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(m), y(k);
        for (double& v : x) v = n(rng);
        for (double& v : y) v = n(rng);
        const auto px = project(sys, x);
        const auto ppx = project(sys, px);
        worst_idem = std::max(worst_idem, relative_error(ppx, px) * norm2(px) / norm2(x));
        const Eigen::VectorXd gy = g * Eigen::Map<const Eigen::VectorXd>(y.data(), k);
        const auto pgy = project(sys, std::vector<double>(gy.data(), gy.data() + m));
        worst_pg = std::max(worst_pg, norm2(pgy) / (g_norm * norm2(y)));
    }
    std::ostringstream os;
    os << "100 samples: max ||P^2x-Px||/||x|| " << worst_idem << ", max ||PGy||/(||G|| ||y||) " << worst_pg
       << " (<= 1e-12)";
    return verdict(worst_idem <= 1e-12 && worst_pg <= 1e-12, os);
}

Verdict criterion8()
{
    std::ostringstream os;
    bool ok = true;
    for (auto [strategy, path] : {std::pair{Strategy::implicit, Path::trsm}, {Strategy::explicit_assembly, Path::trsm},
                                  {Strategy::explicit_assembly, Path::syrk}}) {
        FetiProblem p = build_problem(make_spec(Physics::heat, 2, 6, 3));
        DualOpConfig c;
        c.strategy = strategy;
        c.path = path;
        long preprocess_allocs = 0;
        const StepRun run = run_steps(
            p, 3, [](int s) { return 1.0 + s; }, c, PcpgConfig{},
            [&](int step, bool after) {
                if (step == 0) return;
                if (!after) {
                    g_allocations = 0;
                    g_counting = true;
                } else {
                    g_counting = false;
                    preprocess_allocs += g_allocations.load();
                }
            });
        // Applies between preprocesses: the operator stays allocation free too.
        DualOperator op(p, c);
        op.prepare();
        op.preprocess();
        std::vector<double> x(p.multiplier_count(), 1.0), y(x.size());
        op.apply(x, y);
        g_allocations = 0;
        g_counting = true;
        for (int i = 0; i < 10; ++i) op.apply(x, y);
        g_counting = false;
        const long apply_allocs = g_allocations.load();

        const long n = p.subdomain_count();
        const bool this_ok = run.symbolic_count == n && run.numeric_count == 3 * n && preprocess_allocs == 0 &&
                             apply_allocs == 0;
        ok = ok && this_ok;
        os << describe(c) << ": symbolic " << run.symbolic_count << "/" << n << ", numeric " << run.numeric_count << "/"
           << 3 * n << ", allocations in steps 2-3 preprocess " << preprocess_allocs << ", apply " << apply_allocs
           << "; ";
    }
    return verdict(ok, os);
}

// Sequential first-fit/FIFO model for replaying the observed pool events.
class PoolModel {
public:
    explicit PoolModel(std::size_t capacity) { free_[0] = capacity; }

    bool on_event(const PoolEvent& e)
    {
        switch (e.kind) {
        case PoolEvent::Kind::request:
            queue_.push_back({e.ticket, e.size});
            return true;
        case PoolEvent::Kind::grant: {
            auto it = std::find_if(queue_.begin(), queue_.end(), [&](const auto& q) { return q.first == e.ticket; });
            if (it == queue_.end()) return false;
            const std::size_t size = it->second;
            if (it != queue_.begin() && size != 0) return false;
            queue_.erase(it);
            if (size == 0) {
                live_[e.ticket] = {0, 0};
                return true;
            }
            auto blk = std::find_if(free_.begin(), free_.end(), [&](const auto& f) { return f.second >= size; });
            if (blk == free_.end() || blk->first != e.offset) return false;
            const auto [off, s] = *blk;
            free_.erase(blk);
            if (s > size) free_[off + size] = s - size;
            live_[e.ticket] = {off, size};
            return true;
        }
        case PoolEvent::Kind::release: {
            auto it = live_.find(e.ticket);
            if (it == live_.end()) return false;
            const auto [off, size] = it->second;
            live_.erase(it);
            if (size == 0) return true;
            auto pos = free_.emplace(off, size).first;
            if (auto next = std::next(pos); next != free_.end() && off + pos->second == next->first) {
                pos->second += next->second;
                free_.erase(next);
            }
            if (pos != free_.begin())
                if (auto prev = std::prev(pos); prev->first + prev->second == pos->first) {
                    prev->second += pos->second;
                    free_.erase(pos);
                }
            return true;
        }
        }
        return false;
    }

    bool head_blocked() const
    {
        if (queue_.empty()) return true;
        const std::size_t size = queue_.front().second;
        return size != 0 && std::none_of(free_.begin(), free_.end(), [&](const auto& f) { return f.second >= size; });
    }

private:
    std::map<std::size_t, std::size_t> free_;
    std::map<std::uint64_t, std::pair<std::size_t, std::size_t>> live_;
    std::deque<std::pair<std::uint64_t, std::size_t>> queue_;
};

Verdict criterion9()
{
    constexpr std::size_t capacity = 4096;
    Pool pool(capacity, 1, false);
    std::vector<PoolEvent> log;
    log.reserve(40000);
    long audits = 0, violations = 0;
    pool.set_observer([&](const PoolEvent& e, std::span<const LedgerEntry> ledger) {
        log.push_back(e);
        ++audits;
        std::vector<std::pair<std::size_t, std::size_t>> live;
        for (const auto& l : ledger)
            if (l.size > 0) live.emplace_back(l.offset, l.size);
        std::sort(live.begin(), live.end());
        std::size_t end = 0;
        for (const auto& [o, s] : live) {
            if (o < end) ++violations;
            end = o + s;
        }
        if (end > capacity) ++violations;
    });
    const auto start = Clock::now();
    std::vector<std::thread> workers;
    for (int w = 0; w < 8; ++w)
        workers.emplace_back([&pool, w] {
            std::mt19937_64 rng(500 + w);
            std::uniform_int_distribution<std::size_t> size(0, capacity / 2);
            std::optional<Region> held;
            for (int op = 0; op < 1000; ++op) {
                if (!held) {
                    held = pool.acquire(size(rng), w);
                } else {
                    pool.release(*held);
                    held.reset();
                }
            }
            if (held) pool.release(*held);
        });
    for (auto& t : workers) t.join();
    const double elapsed = seconds_since(start);

    PoolModel model(capacity);
    bool replay_ok = true, serving = false;
    for (std::size_t i = 0; i < log.size() && replay_ok; ++i) {
        replay_ok = model.on_event(log[i]);
        if (log[i].kind == PoolEvent::Kind::release) serving = true;
        else if (log[i].kind == PoolEvent::Kind::request) serving = false;
        if (serving && (i + 1 == log.size() || log[i + 1].kind != PoolEvent::Kind::grant)) {
            replay_ok = replay_ok && model.head_blocked();
            serving = false;
        }
    }
    std::ostringstream os;
    os << "8 workers x 1000 ops in " << elapsed << " s (< 5 s), " << audits << " audited transitions, " << violations
       << " violations, model replay " << (replay_ok ? "matches" : "diverges");
    return verdict(elapsed < 5.0 && violations == 0 && replay_ok && pool.live_count() == 0, os);
}

Verdict criterion10()
{
    const auto a = amortization_point({4, 3}, {10, 1});
    const auto b = amortization_point({4, 3}, {10, 3});
    const auto c = amortization_point({4, 3}, {2, 1});
    std::ostringstream os;
    os << "impl(4,3)/expl(10,1) -> " << format_amortization(a) << ", equal apply -> " << format_amortization(b)
       << ", expl(2,1) -> " << format_amortization(c);
    return verdict(a == 3 && !b && c == 0, os);
}

Verdict criterion11()
{
    // 3D heat, 12^3 cells per subdomain: 2197 DOFs.
    const FetiProblem full = build_problem(make_spec(Physics::heat, 3, 12, 2));
    const FetiProblem sample = extract_subdomain(full, representative_subdomain(full));
    DualOpConfig impl, expl;
    expl.strategy = Strategy::explicit_assembly;
    const Timing ti = measure_config(sample, impl, 50);
    const Timing te = measure_config(sample, expl, 50);
    std::ostringstream os;
    os << sample.subdomains[0].dofs() << " DOFs, " << sample.multiplier_count() << " multipliers: apply explicit "
       << te.t_apply << " ms vs implicit " << ti.t_apply << " ms; preprocess " << te.t_preprocess << " vs "
       << ti.t_preprocess << " ms, amortization " << format_amortization(amortization_point(ti, te));
    return {sample.subdomains[0].dofs() >= 2000 && te.t_apply <= ti.t_apply ? Verdict::pass : Verdict::warn, os.str()};
}

} // namespace

int main()
{
    report(1, "end-to-end 2D heat", [] { return end_to_end(problem1, 10.0); });
    report(2, "end-to-end 3D heat", [] { return end_to_end(problem2, 30.0); });
    report(3, "end-to-end 2D elasticity", criterion3);
    report(4, "strategy equivalence", criterion4);
    report(5, "assembly grid equivalence", criterion5);
    report(6, "Schur complement oracle", criterion6);
    report(7, "projector properties", criterion7);
    report(8, "lifecycle counters and pool-only allocation", criterion8);
    report(9, "pool allocator under contention", criterion9);
    report(10, "amortization arithmetic", criterion10);
    report(11, "explicit apply faster than implicit (soft)", criterion11);
    return failures == 0 ? 0 : 1;
}
