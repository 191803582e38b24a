// Serial reference against the OpenMP subdomain loops for preprocess and apply.
#include "feti/dual_operator.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

using namespace feti;

namespace {

const FetiProblem& problem(int dim)
{
    static std::map<int, std::unique_ptr<FetiProblem>> cache;
    auto& p = cache[dim];
    if (!p) {
        ProblemSpec s;
        s.dim = dim;
        s.cells_per_subdomain = dim == 2 ? 16 : 6;
        s.subdomains_per_side = dim == 2 ? 4 : 2;
        s.clusters = 2;
        p = std::make_unique<FetiProblem>(build_problem(s));
    }
    return *p;
}

DualOpConfig config(const benchmark::State& state)
{
    DualOpConfig c;
    c.execution = state.range(1) ? Execution::openmp : Execution::serial;
    c.strategy = state.range(2) ? Strategy::explicit_assembly : Strategy::implicit;
    return c;
}

void label(benchmark::State& state)
{
    state.SetLabel(std::string(state.range(1) ? "openmp" : "serial") + "/" +
                   (state.range(2) ? "explicit" : "implicit"));
}

void BM_Preprocess(benchmark::State& state)
{
    const FetiProblem& p = problem(static_cast<int>(state.range(0)));
    DualOperator op(p, config(state));
    op.prepare();
    for (auto _ : state) op.preprocess();
    label(state);
}

void BM_Apply(benchmark::State& state)
{
    const FetiProblem& p = problem(static_cast<int>(state.range(0)));
    DualOperator op(p, config(state));
    op.prepare();
    op.preprocess();
    std::vector<double> x(p.multiplier_count(), 1.0), y(x.size());
    for (auto _ : state) {
        op.apply(x, y);
        benchmark::DoNotOptimize(y.data());
    }
    label(state);
}

} // namespace

BENCHMARK(BM_Preprocess)->ArgsProduct({{2, 3}, {0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Apply)->ArgsProduct({{2, 3}, {0, 1}, {0, 1}})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
