#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ercbf/acc.hpp"
#include "ercbf/controllers.hpp"

namespace ercbf::sim {

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One classic RK4 step with the input held constant.
template <class Dynamics>
Vec integrate_step(const Dynamics& f, const Vec& x, const Vec& u, double dt) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("integration step must be positive");
    }
    const Vec k1 = f(x, u);
    const Vec k2 = f(Vec(x + 0.5 * dt * k1), u);
    const Vec k3 = f(Vec(x + 0.5 * dt * k2), u);
    const Vec k4 = f(Vec(x + dt * k3), u);
    Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) {
        throw DivergenceError("state became non-finite during integration");
    }
    return next;
}

enum class ControllerKind { kNominal, kSocp, kQp };
enum class DesiredInputMode { kTwoStage, kSoftClf };

const char* to_string(ControllerKind kind);

struct AccScenario {
    acc::VehicleParams vehicle;
    acc::HdvModel hdv;
    acc::AccErrorBounds bounds{1.0, 1.0, 0.0};
    double nu = 5.0;
    double c3 = 5.0;
    double v_desired = 110.0 * acc::kKmhToMps;  // ego cruise speed
    double v_max = 120.0 * acc::kKmhToMps;
    double v_min = 60.0 * acc::kKmhToMps;
    double initial_gap = 80.0;
    double ego_p0 = 0.0;
    double ego_v0 = 27.78;
    double lead_v0 = 27.78;
};

struct SimConfig {
    double dt_control = 0.01;
    int substeps = 10;
    double horizon = 20.0;
    ControllerKind controller = ControllerKind::kQp;
    std::uint64_t seed = 1;
    acc::NoisePolicy measurement = acc::NoisePolicy::kUniform;
    acc::ResampleMode resample = acc::ResampleMode::kPerTick;
    DesiredInputMode desired_input = DesiredInputMode::kTwoStage;
    double clf_weight = 1e4;
    bool abort_on_infeasible = false;
    AccScenario scenario;

    double dt_integrator() const { return dt_control / substeps; }
    int num_ticks() const { return static_cast<int>(std::llround(horizon / dt_control)); }
    void validate() const;
};

enum class StepStatus { kOptimal, kInfeasible, kDegenerate };

const char* to_string(StepStatus status);

struct StepRecord {
    double t = 0.0;
    double p = 0.0;
    double v = 0.0;
    double p_s = 0.0;
    double v_s = 0.0;
    double v_s_dot = 0.0;
    double p_s_hat = 0.0;
    double v_s_hat = 0.0;
    double v_s_dot_hat = 0.0;
    double u_des = 0.0;
    double u_nom = 0.0;
    double u_applied = 0.0;
    double h_nominal = 0.0;  // h at the measured lead state
    double h_true = 0.0;
    double h_band_lo = 0.0;
    double h_band_hi = 0.0;
    double V = 0.0;
    double phi_nom = 0.0;
    double phi_rob = 0.0;
    double phi_rob_hat = std::numeric_limits<double>::quiet_NaN();
    double u_delta = 0.0;
    double u_delta_bar = std::numeric_limits<double>::quiet_NaN();
    double e_h_star = 0.0;
    double e_grad_h_star = 0.0;
    double e_dhdt_star = 0.0;
    StepStatus status = StepStatus::kOptimal;

    double gap() const { return p_s - p; }
};

enum class RunOutcome { kCompleted, kDiverged, kAbortedInfeasible };

struct Trajectory {
    std::vector<StepRecord> records;
    RunOutcome outcome = RunOutcome::kCompleted;
    std::string message;
};

/// Band h(x, xs_hat) + [min e_h, max e_h] over the error box.
std::pair<double, double> h_uncertainty_band(const BarrierSpec& bar, const Vec& x, const EnvironmentEstimate& est,
                                             const ErrorExpression& e_h, const ErrorBounds& bounds);

/// Closed-loop run: zero-order hold at dt_control, RK4 substeps for both
/// vehicles. Deterministic for a given config.
Trajectory run_closed_loop(const SimConfig& config);

inline constexpr double kViolationTol = 1e-6;

struct RunMetrics {
    std::uint64_t seed = 0;
    double min_h_true = 0.0;
    double min_h_band_lo = 0.0;
    double min_gap = 0.0;
    int infeasible_steps = 0;
    int violation_steps = 0;
    double mean_abs_u = 0.0;
    RunOutcome outcome = RunOutcome::kCompleted;
};

RunMetrics summarize(const Trajectory& traj, std::uint64_t seed);

struct Distribution {
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
    double p05 = 0.0;
    double p50 = 0.0;
};

struct MonteCarloSummary {
    std::vector<RunMetrics> runs;  // in seed order
    double violation_rate = 0.0;   // fraction of runs with any h_true < -kViolationTol
    int total_violation_steps = 0;
    int total_infeasible_steps = 0;
    int diverged_runs = 0;
    Distribution min_h_true;
    Distribution min_gap;
};

/// Runs seeds config.seed, config.seed + 1, ... on up to `threads` workers.
MonteCarloSummary monte_carlo(const SimConfig& config, int n_runs, int threads = 1);

}  // namespace ercbf::sim
