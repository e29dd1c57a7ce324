#include "ercbf/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <fmt/format.h>

#include "ercbf/cli/config.hpp"
#include "ercbf/cli/io.hpp"

namespace ercbf::cli {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

ExperimentConfig resolve(const CommandOptions& opts) {
    ExperimentConfig cfg = load_config(opts.config);
    if (opts.controller) {
        cfg.sim.controller = parse_controller(*opts.controller);
    }
    if (opts.seed) {
        cfg.sim.seed = *opts.seed;
        cfg.seeds = {*opts.seed};
    }
    if (opts.out) {
        cfg.output.dir = *opts.out;
    }
    if (opts.runs) {
        if (*opts.runs < 1) {
            throw ConfigError("--runs", "must be at least 1");
        }
        cfg.mc_runs = *opts.runs;
    }
    std::filesystem::create_directories(cfg.output.dir);
    return cfg;
}

int outcome_code(sim::RunOutcome outcome) {
    switch (outcome) {
    case sim::RunOutcome::kCompleted:
        return kExitOk;
    case sim::RunOutcome::kAbortedInfeasible:
        return kExitInfeasible;
    case sim::RunOutcome::kDiverged:
        return kExitDiverged;
    }
    return kExitFailure;
}

template <class Body>
int guarded(Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

int monte_carlo_threads() {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("ERCBF_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap >= 1) {
            n = std::min<long>(n, cap);
        }
    }
    return n;
}

int cmd_run(const CommandOptions& opts) {
    return guarded([&] {
        const ExperimentConfig cfg = resolve(opts);
        const auto start = Clock::now();
        const sim::Trajectory traj = sim::run_closed_loop(cfg.sim);
        const double wall = seconds_since(start);
        const sim::RunMetrics m = sim::summarize(traj, cfg.sim.seed);

        write_trajectory_csv(cfg.output.dir / "trajectory.csv", traj);
        json metrics = metrics_json(m, wall);
        metrics["controller"] = sim::to_string(cfg.sim.controller);
        if (!traj.message.empty()) {
            metrics["message"] = traj.message;
        }
        write_json(cfg.output.dir / "metrics.json", metrics);
        if (!traj.message.empty()) {
            std::cerr << traj.message << '\n';
        }
        std::cout << fmt::format("{} seed {}: min h_true {:.4f}, min band_lo {:.4f}, min gap {:.3f} m, {} infeasible\n",
                                 sim::to_string(cfg.sim.controller), m.seed, m.min_h_true, m.min_h_band_lo,
                                 m.min_gap, m.infeasible_steps);
        return outcome_code(traj.outcome);
    });
}

int cmd_compare(const CommandOptions& opts) {
    return guarded([&] {
        const ExperimentConfig cfg = resolve(opts);
        constexpr std::array<sim::ControllerKind, 3> kinds{sim::ControllerKind::kNominal,
                                                           sim::ControllerKind::kSocp, sim::ControllerKind::kQp};
        std::array<sim::Trajectory, 3> trajs;
        json per_controller = json::object();
        int code = kExitOk;
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            sim::SimConfig sc = cfg.sim;
            sc.controller = kinds[i];
            const auto start = Clock::now();
            trajs[i] = sim::run_closed_loop(sc);
            const double wall = seconds_since(start);
            const char* name = sim::to_string(kinds[i]);
            write_trajectory_csv(cfg.output.dir / fmt::format("trajectory_{}.csv", name), trajs[i]);
            per_controller[name] = metrics_json(sim::summarize(trajs[i], sc.seed), wall);
            code = std::max(code, outcome_code(trajs[i].outcome));
        }

        const auto& nom = trajs[0].records;
        const auto& socp = trajs[1].records;
        const auto& qp = trajs[2].records;
        const std::size_t n = std::min({nom.size(), socp.size(), qp.size()});

        std::ofstream deltas(cfg.output.dir / "deltas.csv", std::ios::binary);
        deltas << "t,u_qp_minus_socp,gap_qp_minus_socp,h_qp_minus_socp,u_socp_minus_nominal,"
                  "gap_socp_minus_nominal,h_socp_minus_nominal\n";
        double max_du = 0.0;
        double max_dgap = 0.0;
        double max_dh = 0.0;
        json decomposition{{"t", json::array()}, {"u_nom", json::array()}, {"u_delta_hat", json::array()},
                           {"u_rob", json::array()}};
        double max_recon = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double du = qp[k].u_applied - socp[k].u_applied;
            const double dgap = qp[k].gap() - socp[k].gap();
            const double dh = qp[k].h_true - socp[k].h_true;
            max_du = std::max(max_du, std::abs(du));
            max_dgap = std::max(max_dgap, std::abs(dgap));
            max_dh = std::max(max_dh, std::abs(dh));
            deltas << format_double(qp[k].t) << ',' << format_double(du) << ',' << format_double(dgap) << ','
                   << format_double(dh) << ',' << format_double(socp[k].u_applied - nom[k].u_applied) << ','
                   << format_double(socp[k].gap() - nom[k].gap()) << ','
                   << format_double(socp[k].h_true - nom[k].h_true) << '\n';
            decomposition["t"].push_back(qp[k].t);
            decomposition["u_nom"].push_back(qp[k].u_nom);
            decomposition["u_delta_hat"].push_back(qp[k].u_delta);
            decomposition["u_rob"].push_back(qp[k].u_applied);
            max_recon = std::max(max_recon, std::abs(qp[k].u_nom + qp[k].u_delta - qp[k].u_applied));
        }
        decomposition["max_abs_reconstruction_error"] = max_recon;

        auto min_gap = [](const std::vector<sim::StepRecord>& recs) {
            double g = std::numeric_limits<double>::infinity();
            for (const auto& r : recs) {
                g = std::min(g, r.gap());
            }
            return g;
        };
        const json comparison{
            {"seed", cfg.sim.seed},
            {"steps_compared", n},
            {"controllers", per_controller},
            {"max_abs_u_qp_minus_socp", max_du},
            {"max_abs_gap_qp_minus_socp", max_dgap},
            {"max_abs_h_qp_minus_socp", max_dh},
            {"min_gap_qp_minus_socp", min_gap(qp) - min_gap(socp)},
            {"qp_decomposition", decomposition},
        };
        write_json(cfg.output.dir / "comparison.json", comparison);
        std::cout << fmt::format("seed {}: max |u_qp - u_socp| = {:.4g} N, max |gap_qp - gap_socp| = {:.4g} m\n",
                                 cfg.sim.seed, max_du, max_dgap);
        return code;
    });
}

int cmd_montecarlo(const CommandOptions& opts) {
    return guarded([&] {
        const ExperimentConfig cfg = resolve(opts);
        const int threads = monte_carlo_threads();
        const auto start = Clock::now();
        const sim::MonteCarloSummary mc = sim::monte_carlo(cfg.sim, cfg.mc_runs, threads);
        const double wall = seconds_since(start);

        std::ofstream runs(cfg.output.dir / "runs.csv", std::ios::binary);
        runs << "seed,min_h_true,min_h_band_lo,min_gap,infeasible_steps,violation_steps,mean_abs_u,outcome\n";
        for (const sim::RunMetrics& r : mc.runs) {
            runs << r.seed << ',' << format_double(r.min_h_true) << ',' << format_double(r.min_h_band_lo) << ','
                 << format_double(r.min_gap) << ',' << r.infeasible_steps << ',' << r.violation_steps << ','
                 << format_double(r.mean_abs_u) << ',' << to_string(r.outcome) << '\n';
        }

        auto dist = [](const sim::Distribution& d) {
            return json{{"min", d.min}, {"mean", d.mean}, {"max", d.max}, {"p05", d.p05}, {"p50", d.p50}};
        };
        const json summary{
            {"controller", sim::to_string(cfg.sim.controller)},
            {"runs", mc.runs.size()},
            {"first_seed", cfg.sim.seed},
            {"violation_rate", mc.violation_rate},
            {"total_violation_steps", mc.total_violation_steps},
            {"total_infeasible_steps", mc.total_infeasible_steps},
            {"diverged_runs", mc.diverged_runs},
            {"min_h_true", dist(mc.min_h_true)},
            {"min_gap", dist(mc.min_gap)},
            {"threads", threads},
            {"wall_time_s", wall},
        };
        write_json(cfg.output.dir / "summary.json", summary);
        std::cout << fmt::format("{} x {}: violation rate {:.3f}, {} infeasible steps, min h_true {:.4f}\n",
                                 sim::to_string(cfg.sim.controller), mc.runs.size(), mc.violation_rate,
                                 mc.total_infeasible_steps, mc.min_h_true.min);
        return kExitOk;
    });
}

}  // namespace ercbf::cli
