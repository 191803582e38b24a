#include "feti/bench.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace feti;

namespace {

struct Options {
    std::string physics = "heat";
    int dim = 2;
    Index cells = 8;
    Index subdomains = 2;
    Index clusters = 1;
    std::string strategy = "implicit";
    std::string path = "trsm";
    std::string forward_storage = "sparse";
    std::string backward_storage = "sparse";
    std::string forward_order = "row";
    std::string backward_order = "row";
    std::string rhs_order = "col";
    std::string staging = "cluster_wide";
    std::string execution = "openmp";
    std::string precond = "none";
    double tol = 1e-9;
    int maxit = 1000;
    int reps = 1;
    int steps = 1;
    int threads = 0;
    std::size_t pool_bytes = 0;
    std::uint64_t seed = 0;
    bool sweep = false;
    std::optional<double> autotune;
    std::string csv;
};

DualOpConfig base_config(const Options& o)
{
    DualOpConfig c;
    c.strategy = parse<Strategy>(o.strategy);
    c.path = parse<Path>(o.path);
    c.forward_storage = parse<Storage>(o.forward_storage);
    c.backward_storage = parse<Storage>(o.backward_storage);
    c.forward_order = parse<Order>(o.forward_order);
    c.backward_order = parse<Order>(o.backward_order);
    c.rhs_order = parse<Order>(o.rhs_order);
    c.staging = parse<Staging>(o.staging);
    c.execution = o.execution == "serial" ? Execution::serial : Execution::openmp;
    c.threads = o.threads;
    return c;
}

void print_summary(const MeasurementSet& set)
{
    std::cerr << std::setprecision(4);
    for (std::size_t i = 0; i < set.grid.size(); ++i) {
        const ConfigSummary& s = set.summary[i];
        std::cerr << describe(set.grid[i]) << ": ";
        if (!s.ok) {
            std::cerr << "failed\n";
            continue;
        }
        std::cerr << "preprocess " << s.median.t_preprocess << " ms, apply " << s.median.t_apply << " ms, "
                  << s.iterations << " iterations";
        if (set.grid[i].strategy != Strategy::implicit && set.implicit_baseline && set.implicit_baseline->ok)
            std::cerr << ", amortization "
                      << format_amortization(amortization_point(set.implicit_baseline->median, s.median));
        std::cerr << '\n';
    }
    for (const Measurement& m : set.rows)
        if (!m.ok) std::cerr << "config " << m.config_index << " rep " << m.rep << ": " << m.error << '\n';
    if (!set.iterations_consistent()) std::cerr << "warning: iteration counts differ between configurations\n";
}

} // namespace

int main(int argc, char** argv)
{
    Options o;
    CLI::App app{"Total FETI dual-operator benchmark"};
    app.set_config("--config", "", "key = value file with the same keys as the flags");
    app.add_option("--physics", o.physics)->check(CLI::IsMember({"heat", "elasticity"}));
    app.add_option("--dim", o.dim)->check(CLI::IsMember({2, 3}));
    app.add_option("--cells", o.cells, "cells per subdomain side")->check(CLI::PositiveNumber);
    app.add_option("--subdomains", o.subdomains, "subdomains per side")->check(CLI::PositiveNumber);
    app.add_option("--clusters", o.clusters)->check(CLI::PositiveNumber);
    app.add_option("--strategy", o.strategy)->check(CLI::IsMember({"implicit", "explicit", "schur_oracle"}));
    app.add_option("--path", o.path)->check(CLI::IsMember({"trsm", "syrk"}));
    const auto storage = CLI::IsMember({"sparse", "dense"});
    const auto order = CLI::IsMember({"row", "col"});
    app.add_option("--forward-storage", o.forward_storage)->check(storage);
    app.add_option("--backward-storage", o.backward_storage)->check(storage);
    app.add_option("--forward-order", o.forward_order)->check(order);
    app.add_option("--backward-order", o.backward_order)->check(order);
    app.add_option("--rhs-order", o.rhs_order)->check(order);
    app.add_option("--staging", o.staging)->check(CLI::IsMember({"per_subdomain", "cluster_wide"}));
    app.add_option("--execution", o.execution)->check(CLI::IsMember({"serial", "openmp"}));
    app.add_option("--precond", o.precond)->check(CLI::IsMember({"none", "lumped"}));
    app.add_option("--tol", o.tol)->check(CLI::PositiveNumber);
    app.add_option("--maxit", o.maxit)->check(CLI::PositiveNumber);
    app.add_option("--reps", o.reps)->check(CLI::PositiveNumber);
    app.add_option("--steps", o.steps, "time steps per solve")->check(CLI::PositiveNumber);
    app.add_option("--threads", o.threads, "OpenMP workers, 0 for the runtime default")->check(CLI::NonNegativeNumber);
    app.add_option("--pool-bytes", o.pool_bytes, "total pool budget, 0 to size automatically");
    app.add_option("--seed", o.seed);
    app.add_flag("--sweep", o.sweep, "run the full assembly grid");
    app.add_option("--autotune", o.autotune, "pick the best configuration for K iterations")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--csv", o.csv, "write rows here instead of stdout");
    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg;
        cfg.problem.physics = parse<Physics>(o.physics);
        cfg.problem.dim = o.dim;
        cfg.problem.cells_per_subdomain = o.cells;
        cfg.problem.subdomains_per_side = o.subdomains;
        cfg.problem.clusters = o.clusters;
        cfg.pcpg.tol = o.tol;
        cfg.pcpg.maxit = o.maxit;
        cfg.pcpg.precond = o.precond == "lumped" ? Preconditioner::lumped : Preconditioner::none;
        cfg.repetitions = o.reps;
        cfg.steps = o.steps;
        cfg.pool_bytes = o.pool_bytes;
        cfg.seed = o.seed;

        const DualOpConfig base = base_config(o);
        if (o.autotune) {
            const auto grid = full_grid(base);
            const FetiProblem problem = build_problem(cfg.problem);
            const DualOpConfig pick = autotune(problem, grid, *o.autotune);
            std::cerr << "autotune (k = " << *o.autotune << "): " << describe(pick) << '\n';
            cfg.grid = {pick};
        } else {
            cfg.grid = o.sweep ? full_grid(base) : std::vector<DualOpConfig>{base};
        }

        const MeasurementSet set = run_experiment(cfg);
        if (o.csv.empty()) {
            write_csv(std::cout, set);
        } else {
            std::ofstream out(o.csv);
            if (!out) throw std::runtime_error("cannot open " + o.csv);
            write_csv(out, set);
        }
        print_summary(set);
        const bool any_ok = std::any_of(set.rows.begin(), set.rows.end(), [](const Measurement& m) { return m.ok; });
        return any_ok ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
