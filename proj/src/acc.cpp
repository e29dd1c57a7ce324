#include "ercbf/acc.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace ercbf::acc {

void VehicleParams::validate() const {
    if (!(mass > 0.0)) {
        throw std::invalid_argument(fmt::format("vehicle mass must be positive, got {}", mass));
    }
    if (!(max_decel() > 0.0)) {
        throw std::invalid_argument("c_d * g must be positive");
    }
    if (!(T_h >= 0.0)) {
        throw std::invalid_argument("look-ahead time must be nonnegative");
    }
}

void HdvModel::validate() const {
    if (!(lambda >= 0.0) || !(sigma >= 0.0) || !(tau >= 0.0)) {
        throw std::invalid_argument("free-flow model needs lambda, sigma, tau >= 0");
    }
}

void AccErrorBounds::validate() const {
    if (!(E_p >= 0.0) || !(E_v >= 0.0) || !(E_vdot >= 0.0)) {
        throw std::invalid_argument("measurement error bounds must be nonnegative");
    }
}

ErrorBounds AccErrorBounds::to_error_bounds() const {
    validate();
    ErrorBounds b{Vec(2), Vec(2)};
    b.E_s << E_p, E_v;
    b.E_s_dot << 0.0, E_vdot;
    return b;
}

double rolling_force(const VehicleParams& params, double v) {
    return params.c0 + params.c1 * v + params.c2 * v * v;
}

EgoRates acc_dynamics(const VehicleParams& params, const EgoState& state, double u) {
    return {state.v, (u - rolling_force(params, state.v)) / params.mass};
}

ControlAffineSystem acc_system(const VehicleParams& params) {
    params.validate();
    auto f = [params](const Vec& x) {
        Vec out(2);
        out << x(1), -rolling_force(params, x(1)) / params.mass;
        return out;
    };
    auto g = [m = params.mass](const Vec&) {
        Mat out(2, 1);
        out << 0.0, 1.0 / m;
        return out;
    };
    return ControlAffineSystem(2, 1, f, g);
}

BarrierSpec acc_barrier(const VehicleParams& params, double nu) {
    params.validate();
    const double T_h = params.T_h;
    const double cdg = params.max_decel();
    BarrierSpec bar;
    bar.nu = nu;
    bar.h = [=](const Vec& x, const Vec& xs) {
        const double dv = xs(1) - x(1);
        return xs(0) - x(0) - T_h * x(1) - dv * dv / (2.0 * cdg);
    };
    bar.grad_x_h = [=](const Vec& x, const Vec& xs) {
        Vec grad(2);
        grad << -1.0, -T_h + (xs(1) - x(1)) / cdg;
        return grad;
    };
    bar.dh_dt = [=](const Vec& x, const Vec& xs, const Vec& xs_dot) {
        return xs_dot(0) - xs_dot(1) * (xs(1) - x(1)) / cdg;
    };
    return bar;
}

ErrorExpressions acc_error_expressions(const VehicleParams& params) {
    params.validate();
    const double cdg = params.max_decel();
    ErrorExpressions out;
    out.h = {[=](const ErrorSample& s) {
                 const double e_p = s.e_s(0);
                 const double e_v = s.e_s(1);
                 const double rel = s.xs_hat(1) - s.x(1);
                 return e_p - (2.0 * e_v * rel + e_v * e_v) / (2.0 * cdg);
             },
             ExpressionClass::kPolynomial, 2};
    out.grad_h = {[=](const ErrorSample& s) { return std::abs(s.e_s(1) / cdg); },
                  ExpressionClass::kNormOfAffine, 1};
    // The estimated lead acceleration multiplies e_v; the e_v * e_vdot term
    // carries the remainder of the true acceleration.
    out.dh_dt = {[=](const ErrorSample& s) {
                     const double e_v = s.e_s(1);
                     const double e_vdot = s.e_s_dot(1);
                     const double rel = s.xs_hat(1) - s.x(1);
                     const double vdot_hat = s.xs_hat_dot(1);
                     return e_v - (vdot_hat * e_v + e_vdot * rel + e_v * e_vdot) / cdg;
                 },
                 ExpressionClass::kPolynomial, 2};
    return out;
}

std::pair<BarrierSpec, BarrierSpec> speed_limit_barriers(double v_max, double v_min, double nu) {
    if (!(v_max > v_min)) {
        throw std::invalid_argument(fmt::format("speed limits need v_max > v_min, got {} <= {}", v_max, v_min));
    }
    auto zero_rate = [](const Vec&, const Vec&, const Vec&) { return 0.0; };
    BarrierSpec upper;
    upper.nu = nu;
    upper.h = [v_max](const Vec& x, const Vec&) { return v_max - x(1); };
    upper.grad_x_h = [](const Vec&, const Vec&) {
        Vec g(2);
        g << 0.0, -1.0;
        return g;
    };
    upper.dh_dt = zero_rate;

    BarrierSpec lower;
    lower.nu = nu;
    lower.h = [v_min](const Vec& x, const Vec&) { return x(1) - v_min; };
    lower.grad_x_h = [](const Vec&, const Vec&) {
        Vec g(2);
        g << 0.0, 1.0;
        return g;
    };
    lower.dh_dt = zero_rate;
    return {upper, lower};
}

LyapunovSpec acc_clf(double v_d, double c3) {
    if (!(c3 > 0.0)) {
        throw std::invalid_argument("CLF rate must be positive");
    }
    LyapunovSpec lyap;
    lyap.c3 = c3;
    lyap.V = [v_d](const Vec& x) { return (x(1) - v_d) * (x(1) - v_d); };
    lyap.grad_V = [v_d](const Vec& x) {
        Vec g(2);
        g << 0.0, 2.0 * (x(1) - v_d);
        return g;
    };
    return lyap;
}

void VelocityHistory::push(double t, double v) {
    if (!samples_.empty() && t <= samples_.back().first) {
        throw std::invalid_argument("velocity history times must increase");
    }
    samples_.emplace_back(t, v);
    // Keep one sample at or before t - horizon for interpolation.
    while (samples_.size() > 2 && samples_[1].first <= t - horizon_) {
        samples_.pop_front();
    }
}

double VelocityHistory::at(double t) const {
    if (samples_.empty() || t < samples_.front().first - 1e-12) {
        throw HistoryError(fmt::format("no lead velocity recorded at t = {}", t));
    }
    if (t >= samples_.back().first) {
        return samples_.back().second;
    }
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double tt, const auto& s) { return tt < s.first; });
    if (it == samples_.begin()) {
        return it->second;
    }
    const auto& [t1, v1] = *it;
    const auto& [t0, v0] = *std::prev(it);
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

double hdv_drift(const HdvModel& model, double v_delayed) {
    return model.lambda * (model.v_desired - v_delayed);
}

HdvDriver::HdvDriver(const HdvModel& model)
    : model_(model), rng_(model.seed), normal_(0.0, model.sigma > 0.0 ? model.sigma : 1.0) {
    model_.validate();
}

double HdvDriver::draw_noise() {
    noise_ = model_.sigma > 0.0 ? normal_(rng_) : 0.0;
    return noise_;
}

double HdvDriver::acceleration(double v_now, const VelocityHistory& history, double t) const {
    const double v_delayed = model_.tau > 0.0 ? history.at(t - model_.tau) : v_now;
    return hdv_drift(model_, v_delayed) + noise_;
}

double hdv_step(HdvDriver& driver, double v_s, const VelocityHistory& history, double t) {
    driver.draw_noise();
    return driver.acceleration(v_s, history, t);
}

MeasurementError draw_error(const AccErrorBounds& bounds, NoisePolicy policy, std::mt19937_64& rng) {
    bounds.validate();
    switch (policy) {
    case NoisePolicy::kZero:
        return {};
    case NoisePolicy::kUniform: {
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        const double a = unit(rng);
        const double b = unit(rng);
        const double c = unit(rng);
        return {a * bounds.E_p, b * bounds.E_v, c * bounds.E_vdot};
    }
    case NoisePolicy::kCorner: {
        std::bernoulli_distribution coin(0.5);
        auto sign = [&] { return coin(rng) ? 1.0 : -1.0; };
        const double a = sign();
        const double b = sign();
        const double c = sign();
        return {a * bounds.E_p, b * bounds.E_v, c * bounds.E_vdot};
    }
    }
    return {};
}

EnvironmentEstimate apply_error(const LeadState& truth, const MeasurementError& e) {
    EnvironmentEstimate est{Vec(2), Vec(2)};
    const double v_hat = truth.v_s - e.e_v;
    est.xs_hat << truth.p_s - e.e_p, v_hat;
    est.xs_hat_dot << v_hat, truth.v_s_dot - e.e_vdot;
    return est;
}

EnvironmentEstimate measure_lead(const LeadState& truth, const AccErrorBounds& bounds, NoisePolicy policy,
                                 std::mt19937_64& rng) {
    return apply_error(truth, draw_error(bounds, policy, rng));
}

LeadSensor::LeadSensor(const AccErrorBounds& bounds, NoisePolicy policy, ResampleMode mode, std::uint64_t seed)
    : bounds_(bounds), policy_(policy), mode_(mode), rng_(seed) {
    bounds_.validate();
}

EnvironmentEstimate LeadSensor::measure(const LeadState& truth) {
    if (!drawn_ || mode_ == ResampleMode::kPerTick) {
        error_ = draw_error(bounds_, policy_, rng_);
        drawn_ = true;
    }
    return apply_error(truth, error_);
}

}  // namespace ercbf::acc
