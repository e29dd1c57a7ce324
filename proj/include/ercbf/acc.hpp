#pragma once

#include <deque>
#include <random>
#include <utility>

#include "ercbf/core.hpp"
#include "ercbf/worst_case.hpp"

/// Adaptive cruise control: an automated ego vehicle following a
/// human-driven lead vehicle whose state is only measured with bounded error.
///
/// Ego state x = [p, v], lead state x_s = [p_s, v_s], lead rate
/// xs_dot = [v_s, vdot_s]. All quantities are SI.
namespace ercbf::acc {

inline constexpr double kKmhToMps = 1.0 / 3.6;

struct VehicleParams {
    double mass = 1650.0;  // kg
    double c0 = 0.1;       // N
    double c1 = 5.0;       // N s/m
    double c2 = 0.25;      // N s^2/m^2
    double c_d = 0.3;
    double grav = 9.81;    // m/s^2
    double T_h = 1.8;      // s, look-ahead time

    double max_decel() const { return c_d * grav; }
    void validate() const;
};

struct EgoState {
    double p = 0.0;
    double v = 0.0;
};

struct LeadState {
    double p_s = 0.0;
    double v_s = 0.0;
    double v_s_dot = 0.0;
};

struct EgoRates {
    double p_dot = 0.0;
    double v_dot = 0.0;
};

struct HdvModel {
    double lambda = 0.309;             // 1/s
    double v_desired = 100.0 * kKmhToMps;
    double tau = 0.0;                  // s
    double sigma = 1.13;               // m/s^2
    std::uint64_t seed = 0;

    void validate() const;
};

struct AccErrorBounds {
    double E_p = 0.0;     // m
    double E_v = 0.0;     // m/s
    double E_vdot = 0.0;  // m/s^2

    void validate() const;
    /// Box over [e_p, e_v] and [e_pdot, e_vdot]. The position-rate error is
    /// e_v itself, so that axis carries no independent width.
    ErrorBounds to_error_bounds() const;
};

double rolling_force(const VehicleParams& params, double v);

EgoRates acc_dynamics(const VehicleParams& params, const EgoState& state, double u);

ControlAffineSystem acc_system(const VehicleParams& params);

/// h = p_s - p - T_h v - (v_s - v)^2 / (2 c_d g)
BarrierSpec acc_barrier(const VehicleParams& params, double nu);

/// Errors h(x, x_s) - h(x, xs_hat) and friends, as functions of the
/// measurement error e = x_s - xs_hat. All are polynomials of degree <= 2
/// in the error coordinates.
ErrorExpressions acc_error_expressions(const VehicleParams& params);

/// h2 = v_max - v and h3 = v - v_min; ego-only.
std::pair<BarrierSpec, BarrierSpec> speed_limit_barriers(double v_max, double v_min, double nu);

/// V = (v - v_d)^2
LyapunovSpec acc_clf(double v_d, double c3);

inline Vec ego_vector(const EgoState& s) {
    Vec x(2);
    x << s.p, s.v;
    return x;
}

inline Vec lead_vector(const LeadState& s) {
    Vec xs(2);
    xs << s.p_s, s.v_s;
    return xs;
}

inline Vec lead_rate_vector(const LeadState& s) {
    Vec r(2);
    r << s.v_s, s.v_s_dot;
    return r;
}

class HistoryError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Past lead velocities, sampled at integrator resolution.
class VelocityHistory {
public:
    explicit VelocityHistory(double horizon) : horizon_(horizon) {}

    void push(double t, double v);
    /// Linearly interpolated velocity at time t.
    double at(double t) const;
    bool empty() const { return samples_.empty(); }

private:
    double horizon_;
    std::deque<std::pair<double, double>> samples_;
};

/// Deterministic part of the free-flow model: lambda (v_desired - v_delayed).
double hdv_drift(const HdvModel& model, double v_delayed);

/// Free-flow lead-vehicle driver. Owns its noise stream.
class HdvDriver {
public:
    explicit HdvDriver(const HdvModel& model);

    const HdvModel& model() const { return model_; }

    /// Draws the next noise sample (held until the next call).
    double draw_noise();

    /// lambda (v_desired - v_s(t - tau)) + epsilon, with epsilon the most
    /// recent noise draw. With tau = 0 the current velocity is used.
    double acceleration(double v_now, const VelocityHistory& history, double t) const;

    double noise() const { return noise_; }

private:
    HdvModel model_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
    double noise_ = 0.0;
};

/// hdv_step with a fresh noise draw.
double hdv_step(HdvDriver& driver, double v_s, const VelocityHistory& history, double t);

enum class NoisePolicy { kZero, kUniform, kCorner };
enum class ResampleMode { kPerTick, kHeld };

struct MeasurementError {
    double e_p = 0.0;
    double e_v = 0.0;
    double e_vdot = 0.0;
};

/// Draws a measurement error inside the box.
MeasurementError draw_error(const AccErrorBounds& bounds, NoisePolicy policy, std::mt19937_64& rng);

/// xs_hat = x_s - e. The measured position rate is the measured velocity.
EnvironmentEstimate apply_error(const LeadState& truth, const MeasurementError& e);

EnvironmentEstimate measure_lead(const LeadState& truth, const AccErrorBounds& bounds, NoisePolicy policy,
                                 std::mt19937_64& rng);

/// Lead-state sensor with its own noise stream and resampling mode.
class LeadSensor {
public:
    LeadSensor(const AccErrorBounds& bounds, NoisePolicy policy, ResampleMode mode, std::uint64_t seed);

    EnvironmentEstimate measure(const LeadState& truth);
    const MeasurementError& last_error() const { return error_; }

private:
    AccErrorBounds bounds_;
    NoisePolicy policy_;
    ResampleMode mode_;
    std::mt19937_64 rng_;
    MeasurementError error_;
    bool drawn_ = false;
};

}  // namespace ercbf::acc
