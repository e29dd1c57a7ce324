#include "ercbf/sim.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <numeric>
#include <random>
#include <thread>

#include <fmt/format.h>

namespace ercbf::sim {

const char* to_string(ControllerKind kind) {
    switch (kind) {
    case ControllerKind::kNominal:
        return "nominal";
    case ControllerKind::kSocp:
        return "socp";
    case ControllerKind::kQp:
        return "qp";
    }
    return "?";
}

const char* to_string(StepStatus status) {
    switch (status) {
    case StepStatus::kOptimal:
        return "optimal";
    case StepStatus::kInfeasible:
        return "infeasible";
    case StepStatus::kDegenerate:
        return "degenerate";
    }
    return "?";
}

void SimConfig::validate() const {
    if (!(dt_control > 0.0) || substeps < 1) {
        throw std::invalid_argument("dt_control must be positive and substeps >= 1");
    }
    if (!(horizon > 0.0)) {
        throw std::invalid_argument("horizon must be positive");
    }
    if (std::abs(horizon / dt_control - num_ticks()) > 1e-6) {
        throw std::invalid_argument(
            fmt::format("horizon {} is not a whole number of control periods {}", horizon, dt_control));
    }
    if (!(clf_weight > 0.0)) {
        throw std::invalid_argument("CLF slack weight must be positive");
    }
    scenario.vehicle.validate();
    scenario.hdv.validate();
    scenario.bounds.validate();
    if (!(scenario.v_max > scenario.v_min)) {
        throw std::invalid_argument("v_max must exceed v_min");
    }
    if (!(scenario.c3 > 0.0) || !(scenario.nu >= 0.0)) {
        throw std::invalid_argument("need c3 > 0 and nu >= 0");
    }
}

std::pair<double, double> h_uncertainty_band(const BarrierSpec& bar, const Vec& x, const EnvironmentEstimate& est,
                                             const ErrorExpression& e_h, const ErrorBounds& bounds) {
    const double h = bar.h(x, est.xs_hat);
    const Extrema ex = extremize(e_h, bounds, x, est);
    return {h + ex.min.value, h + ex.max.value};
}

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

Trajectory run_closed_loop(const SimConfig& config) {
    config.validate();
    const AccScenario& sc = config.scenario;
    const acc::VehicleParams& veh = sc.vehicle;

    const ControlAffineSystem sys = acc::acc_system(veh);
    const BarrierSpec bar = acc::acc_barrier(veh, sc.nu);
    const ErrorExpressions exprs = acc::acc_error_expressions(veh);
    const ErrorBounds ebounds = sc.bounds.to_error_bounds();
    const auto [h_upper, h_lower] = acc::speed_limit_barriers(sc.v_max, sc.v_min, sc.nu);
    const LyapunovSpec clf = acc::acc_clf(sc.v_desired, sc.c3);
    const std::array<BarrierSpec, 1> main_barrier{bar};
    const std::array<BarrierSpec, 3> all_barriers{bar, h_upper, h_lower};

    acc::HdvModel hdv_model = sc.hdv;
    hdv_model.seed = stream_seed(config.seed, 1);
    acc::HdvDriver driver(hdv_model);
    acc::LeadSensor sensor(sc.bounds, config.measurement, config.resample, stream_seed(config.seed, 2));

    const double dt_int = config.dt_integrator();
    acc::VelocityHistory history(hdv_model.tau + config.dt_control);
    if (hdv_model.tau > 0.0) {
        history.push(-hdv_model.tau - dt_int, sc.lead_v0);
    }
    history.push(0.0, sc.lead_v0);

    // z = [p, v, p_s, v_s]
    Vec z(4);
    z << sc.ego_p0, sc.ego_v0, sc.ego_p0 + sc.initial_gap, sc.lead_v0;
    double prev_u = 0.0;

    Trajectory traj;
    const int n_ticks = config.num_ticks();
    traj.records.reserve(static_cast<std::size_t>(n_ticks) + 1);

    for (int k = 0; k <= n_ticks; ++k) {
        const double t = k * config.dt_control;
        driver.draw_noise();
        const acc::LeadState truth{z(2), z(3), driver.acceleration(z(3), history, t)};
        const EnvironmentEstimate est = sensor.measure(truth);
        const Vec x = z.head(2);
        const Vec xs = acc::lead_vector(truth);

        const Extrema eh = extremize(exprs.h, ebounds, x, est);
        const Extrema eg = extremize(exprs.grad_h, ebounds, x, est);
        const Extrema et = extremize(exprs.dh_dt, ebounds, x, est);
        const WorstCaseErrors wce{eh.min.value, std::max(0.0, eg.max.value), et.min.value};

        std::array<HalfSpace, 2> speed{nominal_halfspace(sys, h_upper, x, est.xs_hat, est.xs_hat_dot),
                                       nominal_halfspace(sys, h_lower, x, est.xs_hat, est.xs_hat_dot)};

        Vec u_des = clf_desired_input(sys, clf, x);
        if (config.desired_input == DesiredInputMode::kSoftClf) {
            const SoftClfResult soft = clf_soft_qp(sys, clf, all_barriers, x, est.xs_hat, est.xs_hat_dot,
                                                   config.clf_weight);
            if (soft.status == FilterStatus::kOptimal) {
                u_des = soft.u;
            }
        }

        const FilterResult nominal =
            cbf_qp_numeric(sys, main_barrier, x, est.xs_hat, est.xs_hat_dot, u_des, speed);

        StepRecord rec;
        rec.status = nominal.optimal() ? StepStatus::kOptimal : StepStatus::kInfeasible;
        Vec u_applied = Vec::Constant(1, prev_u);
        if (nominal.optimal()) {
            switch (config.controller) {
            case ControllerKind::kNominal:
                u_applied = nominal.u;
                break;
            case ControllerKind::kSocp: {
                const FilterResult r = er_cbf_socp(sys, bar, x, est, wce, nominal.u, speed);
                if (r.optimal()) {
                    u_applied = r.u;
                } else {
                    rec.status = StepStatus::kInfeasible;
                }
                break;
            }
            case ControllerKind::kQp: {
                try {
                    const FilterResult r = er_cbf_qp(sys, bar, x, est, wce, nominal.u, speed);
                    if (r.optimal()) {
                        u_applied = r.u;
                    } else {
                        rec.status = StepStatus::kInfeasible;
                    }
                } catch (const DegenerateError&) {
                    rec.status = StepStatus::kDegenerate;
                }
                break;
            }
            }
        }

        rec.t = t;
        rec.p = z(0);
        rec.v = z(1);
        rec.p_s = truth.p_s;
        rec.v_s = truth.v_s;
        rec.v_s_dot = truth.v_s_dot;
        rec.p_s_hat = est.xs_hat(0);
        rec.v_s_hat = est.xs_hat(1);
        rec.v_s_dot_hat = est.xs_hat_dot(1);
        rec.u_des = u_des(0);
        rec.u_nom = nominal.u(0);
        rec.u_applied = u_applied(0);
        rec.h_nominal = bar.h(x, est.xs_hat);
        rec.h_true = bar.h(x, xs);
        rec.h_band_lo = rec.h_nominal + eh.min.value;
        rec.h_band_hi = rec.h_nominal + eh.max.value;
        rec.V = clf.V(x);
        rec.phi_nom = phi_nominal(sys, bar, x, est.xs_hat, est.xs_hat_dot, u_applied);
        rec.phi_rob = phi_robust(sys, bar, x, est, wce, u_applied);
        rec.u_delta = rec.u_applied - rec.u_nom;
        try {
            rec.u_delta_bar = u_delta_bound(sys, bar, x, est, wce, nominal.u);
            rec.phi_rob_hat = phi_robust_hat(sys, bar, x, est, wce, nominal.u, rec.u_delta_bar, u_applied);
        } catch (const DegenerateError&) {
        }
        rec.e_h_star = wce.e_h_star;
        rec.e_grad_h_star = wce.e_grad_h_star;
        rec.e_dhdt_star = wce.e_dhdt_star;
        traj.records.push_back(rec);

        if (rec.status != StepStatus::kOptimal && config.abort_on_infeasible) {
            traj.outcome = RunOutcome::kAbortedInfeasible;
            traj.message = fmt::format("filter {} at t = {}", to_string(rec.status), t);
            break;
        }
        prev_u = rec.u_applied;
        if (k == n_ticks) {
            break;
        }

        const double noise = driver.noise();
        try {
            for (int j = 0; j < config.substeps; ++j) {
                const double t_sub = t + j * dt_int;
                const bool delayed = hdv_model.tau > 0.0;
                const double v_delayed = delayed ? history.at(t_sub - hdv_model.tau) : 0.0;
                auto dynamics = [&](const Vec& s, const Vec& u) {
                    const acc::EgoRates ego = acc::acc_dynamics(veh, {s(0), s(1)}, u(0));
                    Vec d(4);
                    d << ego.p_dot, ego.v_dot, s(3),
                        acc::hdv_drift(hdv_model, delayed ? v_delayed : s(3)) + noise;
                    return d;
                };
                z = integrate_step(dynamics, z, u_applied, dt_int);
                history.push(t + (j + 1) * dt_int, z(3));
            }
        } catch (const DivergenceError& e) {
            traj.outcome = RunOutcome::kDiverged;
            traj.message = fmt::format("{} after t = {}", e.what(), t);
            break;
        }
    }
    return traj;
}

RunMetrics summarize(const Trajectory& traj, std::uint64_t seed) {
    RunMetrics m;
    m.seed = seed;
    m.outcome = traj.outcome;
    if (traj.records.empty()) {
        return m;
    }
    m.min_h_true = std::numeric_limits<double>::infinity();
    m.min_h_band_lo = std::numeric_limits<double>::infinity();
    m.min_gap = std::numeric_limits<double>::infinity();
    double sum_abs_u = 0.0;
    for (const StepRecord& r : traj.records) {
        m.min_h_true = std::min(m.min_h_true, r.h_true);
        m.min_h_band_lo = std::min(m.min_h_band_lo, r.h_band_lo);
        m.min_gap = std::min(m.min_gap, r.gap());
        if (r.status != StepStatus::kOptimal) {
            ++m.infeasible_steps;
        }
        if (r.h_true < -kViolationTol) {
            ++m.violation_steps;
        }
        sum_abs_u += std::abs(r.u_applied);
    }
    m.mean_abs_u = sum_abs_u / static_cast<double>(traj.records.size());
    return m;
}

namespace {

Distribution describe(std::vector<double> values) {
    Distribution d;
    if (values.empty()) {
        return d;
    }
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto rank = [&](double q) { return values[static_cast<std::size_t>(q * static_cast<double>(n - 1))]; };
    d.min = values.front();
    d.max = values.back();
    d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    d.p05 = rank(0.05);
    d.p50 = rank(0.5);
    return d;
}

}  // namespace

MonteCarloSummary monte_carlo(const SimConfig& config, int n_runs, int threads) {
    if (n_runs < 1) {
        throw std::invalid_argument("monte carlo needs at least one run");
    }
    config.validate();
    MonteCarloSummary out;
    out.runs.resize(static_cast<std::size_t>(n_runs));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < n_runs; i = next++) {
            SimConfig cfg = config;
            cfg.seed = config.seed + static_cast<std::uint64_t>(i);
            out.runs[static_cast<std::size_t>(i)] = summarize(run_closed_loop(cfg), cfg.seed);
        }
    };
    const int n_workers = std::clamp(threads, 1, n_runs);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
    }

    std::vector<double> min_h;
    std::vector<double> min_gap;
    int violating_runs = 0;
    for (const RunMetrics& r : out.runs) {
        violating_runs += r.violation_steps > 0 ? 1 : 0;
        out.total_violation_steps += r.violation_steps;
        out.total_infeasible_steps += r.infeasible_steps;
        out.diverged_runs += r.outcome == RunOutcome::kDiverged ? 1 : 0;
        min_h.push_back(r.min_h_true);
        min_gap.push_back(r.min_gap);
    }
    out.violation_rate = static_cast<double>(violating_runs) / n_runs;
    out.min_h_true = describe(std::move(min_h));
    out.min_gap = describe(std::move(min_gap));
    return out;
}

}  // namespace ercbf::sim
