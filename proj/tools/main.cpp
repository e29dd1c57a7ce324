#include <algorithm>
#include <vector>

#include <CLI11.hpp>

#include "ercbf/cli/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Environmentally robust CBF safety filters for adaptive cruise control"};
    app.require_subcommand(1);

    ercbf::cli::CommandOptions opts;
    std::string controller;
    std::uint64_t seed = 0;
    std::string out;
    int runs = 0;

    std::vector<CLI::Option*> seed_opts;
    std::vector<CLI::Option*> out_opts;
    std::vector<CLI::Option*> controller_opts;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", opts.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        seed_opts.push_back(sub->add_option("--seed", seed, "seed override"));
        out_opts.push_back(sub->add_option("--out", out, "output directory override"));
    };

    CLI::App* run = app.add_subcommand("run", "single closed-loop run");
    add_common(run);
    controller_opts.push_back(run->add_option("--controller", controller, "nominal|socp|qp"));

    CLI::App* compare = app.add_subcommand("compare", "all three controllers on paired seeds");
    add_common(compare);

    CLI::App* mc = app.add_subcommand("montecarlo", "seeded Monte Carlo sweep");
    add_common(mc);
    controller_opts.push_back(mc->add_option("--controller", controller, "nominal|socp|qp"));
    CLI::Option* runs_opt = mc->add_option("--runs", runs, "number of runs")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ercbf::cli::kExitConfig;
    }

    auto given = [](const std::vector<CLI::Option*>& options) {
        return std::any_of(options.begin(), options.end(), [](CLI::Option* o) { return o->count() > 0; });
    };
    if (given(controller_opts)) {
        opts.controller = controller;
    }
    if (given(seed_opts)) {
        opts.seed = seed;
    }
    if (given(out_opts)) {
        opts.out = out;
    }
    if (runs_opt->count() > 0) {
        opts.runs = runs;
    }

    CLI::App* active = app.get_subcommands().front();

    if (active == run) {
        return ercbf::cli::cmd_run(opts);
    }
    if (active == compare) {
        return ercbf::cli::cmd_compare(opts);
    }
    return ercbf::cli::cmd_montecarlo(opts);
}
