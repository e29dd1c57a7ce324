#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <cstring>

#include "ercbf/sim.hpp"
#include "support.hpp"

using namespace ercbf;
using namespace ercbf::sim;

namespace {

SimConfig paper_setup(ControllerKind kind) {
    SimConfig cfg;
    cfg.controller = kind;
    cfg.measurement = acc::NoisePolicy::kZero;
    return cfg;
}

bool same_bits(const StepRecord& a, const StepRecord& b) {
    return std::memcmp(&a, &b, offsetof(StepRecord, status)) == 0 && a.status == b.status;
}

}  // namespace

TEST_CASE("RK4 step on trivial systems") {
    auto still = [](const Vec& x, const Vec&) { return Vec(Vec::Zero(x.size())); };
    Vec x(2);
    x << 3.0, -1.0;
    CHECK(integrate_step(still, x, Vec::Zero(1), 0.1) == x);

    auto cruise = [](const Vec& s, const Vec&) {
        Vec d(2);
        d << s(1), 0.0;
        return d;
    };
    Vec s(2);
    s << 0.0, 27.78;
    for (int i = 0; i < 100; ++i) {
        s = integrate_step(cruise, s, Vec::Zero(1), 0.01);
    }
    CHECK(std::abs(s(0) - 27.78) < 1e-10);

    CHECK_THROWS_AS(integrate_step(still, x, Vec::Zero(1), 0.0), std::invalid_argument);
    auto blowup = [](const Vec& v, const Vec&) { return Vec(v * 1e308); };
    CHECK_THROWS_AS(integrate_step(blowup, x, Vec::Zero(1), 10.0), DivergenceError);
}

TEST_CASE("RK4 error shrinks about sixteenfold when the step halves") {
    // v' = (u - c0 - c1 v - c2 v^2) / m has a closed-form Riccati solution.
    const acc::VehicleParams p;
    const double u = 800.0;
    const double a = p.c2 / p.mass;
    const double b = p.c1 / p.mass;
    const double c = (p.c0 - u) / p.mass;
    const double disc = std::sqrt(b * b - 4 * a * c);
    const double r1 = (-b + disc) / (2 * a);
    const double r2 = (-b - disc) / (2 * a);
    const double v0 = 20.0;
    const double T = 5.0;
    auto exact = [&](double t) {
        const double k = (v0 - r1) / (v0 - r2) * std::exp(-a * (r1 - r2) * t);
        return (r1 - r2 * k) / (1 - k);
    };
    auto f = [&](const Vec& x, const Vec& uu) {
        const acc::EgoRates r = acc::acc_dynamics(p, {x(0), x(1)}, uu(0));
        Vec d(2);
        d << r.p_dot, r.v_dot;
        return d;
    };
    auto error = [&](int steps) {
        Vec x(2);
        x << 0.0, v0;
        const double dt = T / steps;
        for (int i = 0; i < steps; ++i) {
            x = integrate_step(f, x, testing::scalar(u), dt);
        }
        return std::abs(x(1) - exact(T));
    };
    const double ratio = error(4) / error(8);
    CHECK(ratio > 14.0);
    CHECK(ratio < 18.0);
}

TEST_CASE("config validation") {
    SimConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.horizon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SimConfig{};
    cfg.horizon = 1.005;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SimConfig{};
    cfg.substeps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("trajectory layout") {
    SimConfig cfg = paper_setup(ControllerKind::kQp);
    cfg.horizon = 2.0;
    const Trajectory traj = run_closed_loop(cfg);
    REQUIRE(traj.outcome == RunOutcome::kCompleted);
    CHECK(traj.records.size() == 201);
    for (std::size_t k = 1; k < traj.records.size(); ++k) {
        CHECK(traj.records[k].t > traj.records[k - 1].t);
    }
    CHECK(traj.records.front().gap() == doctest::Approx(80.0));
    CHECK(traj.records.back().t == doctest::Approx(2.0));
}

TEST_CASE("equilibrium cruise tracks the desired speed") {
    SimConfig cfg = paper_setup(ControllerKind::kNominal);
    cfg.scenario.hdv.sigma = 0.0;
    cfg.scenario.hdv.v_desired = cfg.scenario.lead_v0;
    cfg.scenario.bounds = {0.0, 0.0, 0.0};
    cfg.scenario.v_desired = cfg.scenario.ego_v0;
    cfg.scenario.initial_gap = 1000.0;
    const Trajectory traj = run_closed_loop(cfg);
    const double h0 = traj.records.front().h_true;
    for (const StepRecord& r : traj.records) {
        CHECK(std::abs(r.v - cfg.scenario.v_desired) < 0.1);
        CHECK(std::abs(r.h_true - h0) < 1.0);
    }
}

TEST_CASE("identical configs give bit-identical trajectories") {
    SimConfig cfg;
    cfg.horizon = 5.0;
    cfg.seed = 1234;
    const Trajectory a = run_closed_loop(cfg);
    const Trajectory b = run_closed_loop(cfg);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        CHECK(same_bits(a.records[k], b.records[k]));
    }
    cfg.seed = 1235;
    const Trajectory c = run_closed_loop(cfg);
    CHECK(c.records.back().v_s != a.records.back().v_s);
}

TEST_CASE("uncertainty band") {
    const acc::VehicleParams p;
    const BarrierSpec bar = acc::acc_barrier(p, 5.0);
    const auto exprs = acc::acc_error_expressions(p);
    Vec x(2);
    x << 0.0, 27.8;
    EnvironmentEstimate est{Vec(2), Vec(2)};
    est.xs_hat << 80.0, 27.8;
    est.xs_hat_dot << 27.8, 0.0;

    const auto [lo0, hi0] = h_uncertainty_band(bar, x, est, exprs.h, ErrorBounds::zero(2));
    CHECK(lo0 == bar.h(x, est.xs_hat));
    CHECK(hi0 == bar.h(x, est.xs_hat));

    const auto [lo, hi] = h_uncertainty_band(bar, x, est, exprs.h, acc::AccErrorBounds{1.0, 1.0, 0.0}.to_error_bounds());
    const double h = bar.h(x, est.xs_hat);
    const double cdg = p.max_decel();
    CHECK(lo == doctest::Approx(h - 1.0 - 1.0 / (2 * cdg)).epsilon(1e-12));
    CHECK(hi == doctest::Approx(h + 1.0).epsilon(1e-12));
}

TEST_CASE("band brackets the true barrier along a noisy run") {
    SimConfig cfg;
    cfg.horizon = 10.0;
    cfg.measurement = acc::NoisePolicy::kUniform;
    const Trajectory traj = run_closed_loop(cfg);
    for (const StepRecord& r : traj.records) {
        CHECK(r.h_band_lo <= r.h_true + 1e-9);
        CHECK(r.h_true <= r.h_band_hi + 1e-9);
    }
}

TEST_CASE("nominal band crosses zero while robust bands stay nonnegative") {
    const RunMetrics nominal = summarize(run_closed_loop(paper_setup(ControllerKind::kNominal)), 1);
    const RunMetrics socp = summarize(run_closed_loop(paper_setup(ControllerKind::kSocp)), 1);
    const RunMetrics qp = summarize(run_closed_loop(paper_setup(ControllerKind::kQp)), 1);
    CHECK(nominal.min_h_band_lo < 0.0);
    CHECK(socp.min_h_band_lo >= 0.0);
    CHECK(qp.min_h_band_lo >= 0.0);
    CHECK(socp.infeasible_steps == 0);
    CHECK(qp.infeasible_steps == 0);
}

TEST_CASE("infeasible filter holds the previous input or aborts") {
    SimConfig cfg = paper_setup(ControllerKind::kNominal);
    cfg.horizon = 1.0;
    cfg.scenario.initial_gap = 10.0;
    const Trajectory held = run_closed_loop(cfg);
    REQUIRE(held.outcome == RunOutcome::kCompleted);
    CHECK(held.records.front().status == StepStatus::kInfeasible);
    CHECK(held.records.front().u_applied == 0.0);

    cfg.abort_on_infeasible = true;
    const Trajectory aborted = run_closed_loop(cfg);
    CHECK(aborted.outcome == RunOutcome::kAbortedInfeasible);
    CHECK(aborted.records.size() == 1);
}

TEST_CASE("Monte Carlo summary") {
    SimConfig cfg;
    cfg.horizon = 3.0;
    cfg.seed = 40;
    const MonteCarloSummary one = monte_carlo(cfg, 1);
    const RunMetrics single = summarize(run_closed_loop(cfg), cfg.seed);
    REQUIRE(one.runs.size() == 1);
    CHECK(one.runs[0].min_h_true == single.min_h_true);
    CHECK(one.min_h_true.min == single.min_h_true);
    CHECK(one.min_gap.p50 == single.min_gap);

    const MonteCarloSummary seq = monte_carlo(cfg, 6, 1);
    const MonteCarloSummary par = monte_carlo(cfg, 6, 3);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(seq.runs[i].seed == cfg.seed + i);
        CHECK(seq.runs[i].min_h_true == par.runs[i].min_h_true);
    }
    CHECK(seq.min_gap.mean == par.min_gap.mean);
    CHECK_THROWS_AS(monte_carlo(cfg, 0), std::invalid_argument);
}
