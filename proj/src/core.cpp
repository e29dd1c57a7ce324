#include "ercbf/core.hpp"

#include <cmath>

#include <fmt/format.h>

namespace ercbf {

namespace {

void expect_size(const Vec& v, int n, const char* what) {
    if (v.size() != n) {
        throw ShapeError(fmt::format("{}: expected dimension {}, got {}", what, n, v.size()));
    }
}

}  // namespace

ControlAffineSystem::ControlAffineSystem(int n, int m, Drift f, InputMatrix g)
    : n_(n), m_(m), f_(std::move(f)), g_(std::move(g)) {
    if (n <= 0 || m <= 0 || n > kMaxDim || m > kMaxDim) {
        throw ShapeError(fmt::format("system dimensions n={} m={} outside [1, {}]", n, m, kMaxDim));
    }
    if (!f_ || !g_) {
        throw std::invalid_argument("control-affine system requires both f and g");
    }
}

Vec ControlAffineSystem::drift(const Vec& x) const {
    expect_size(x, n_, "state");
    Vec out = f_(x);
    expect_size(out, n_, "f(x)");
    return out;
}

Mat ControlAffineSystem::input_matrix(const Vec& x) const {
    expect_size(x, n_, "state");
    Mat out = g_(x);
    if (out.rows() != n_ || out.cols() != m_) {
        throw ShapeError(fmt::format("g(x): expected {}x{}, got {}x{}", n_, m_, out.rows(), out.cols()));
    }
    return out;
}

Vec ControlAffineSystem::velocity(const Vec& x, const Vec& u) const {
    expect_size(u, m_, "input");
    return drift(x) + input_matrix(x) * u;
}

BarrierTerms barrier_terms(const ControlAffineSystem& sys, const BarrierSpec& bar,
                           const Vec& x, const Vec& xs, const Vec& xs_dot) {
    if (xs.size() != xs_dot.size()) {
        throw ShapeError(fmt::format("environment state has dimension {} but its rate has {}",
                                     xs.size(), xs_dot.size()));
    }
    check_finite(x, "state");
    check_finite(xs, "environment state");
    check_finite(xs_dot, "environment rate");
    const Vec grad = bar.grad_x_h(x, xs);
    expect_size(grad, sys.state_dim(), "grad_x h");

    BarrierTerms t;
    t.h = bar.h(x, xs);
    t.dh_dt = bar.dh_dt(x, xs, xs_dot);
    t.lf_h = grad.dot(sys.drift(x));
    t.lg_h = grad.transpose() * sys.input_matrix(x);
    return t;
}

double phi_nominal(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                   const Vec& xs, const Vec& xs_dot, const Vec& u) {
    expect_size(u, sys.input_dim(), "input");
    check_finite(u, "input");
    const BarrierTerms t = barrier_terms(sys, bar, x, xs, xs_dot);
    return t.phi_constant(bar.nu) + t.lg_h.dot(u);
}

double phi_robust(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                  const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u) {
    const double nominal = phi_nominal(sys, bar, x, est.xs_hat, est.xs_hat_dot, u);
    const double speed = sys.velocity(x, u).norm();
    return nominal - wce.e_grad_h_star * speed + wce.e_dhdt_star + bar.alpha(wce.e_h_star);
}

void check_finite(const Vec& v, const std::string& what) {
    if (!v.allFinite()) {
        throw std::domain_error(what + " has non-finite entries");
    }
}

}  // namespace ercbf
