#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ercbf {

/// Upper bound on state, input and environment dimensions.
inline constexpr int kMaxDim = 16;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxDim>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a closed form is undefined (L_g h = 0, zero denominators, ...).
class DegenerateError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Control-affine system  xdot = f(x) + g(x) u.
class ControlAffineSystem {
public:
    using Drift = std::function<Vec(const Vec&)>;
    using InputMatrix = std::function<Mat(const Vec&)>;

    ControlAffineSystem(int n, int m, Drift f, InputMatrix g);

    int state_dim() const { return n_; }
    int input_dim() const { return m_; }

    /// f(x), shape-checked.
    Vec drift(const Vec& x) const;
    /// g(x), shape-checked.
    Mat input_matrix(const Vec& x) const;
    /// f(x) + g(x) u
    Vec velocity(const Vec& x, const Vec& u) const;

private:
    int n_;
    int m_;
    Drift f_;
    InputMatrix g_;
};

/// Barrier h(x, x_s) with its analytic gradient and the time-partial that
/// arises only through the environment trajectory x_s(t). The class-K
/// function is linear, alpha(r) = nu * r.
struct BarrierSpec {
    std::function<double(const Vec& x, const Vec& xs)> h;
    std::function<Vec(const Vec& x, const Vec& xs)> grad_x_h;
    std::function<double(const Vec& x, const Vec& xs, const Vec& xs_dot)> dh_dt;
    double nu = 0.0;

    double alpha(double r) const { return nu * r; }
};

/// Lyapunov function V(x) with gradient and decrease rate c3.
struct LyapunovSpec {
    std::function<double(const Vec& x)> V;
    std::function<Vec(const Vec& x)> grad_V;
    double c3 = 1.0;
};

/// Measured environment state and rate.
struct EnvironmentEstimate {
    Vec xs_hat;
    Vec xs_hat_dot;

    int env_dim() const { return static_cast<int>(xs_hat.size()); }
};

/// Extremal error quantities: e_h* and e_dhdt* are minima over the error
/// box, e_grad_h* is the maximum of the gradient-error norm.
struct WorstCaseErrors {
    double e_h_star = 0.0;
    double e_grad_h_star = 0.0;
    double e_dhdt_star = 0.0;
};

/// Evaluated barrier terms at one (x, x_s, xs_dot). Phi(u) = constant + Lgh * u.
struct BarrierTerms {
    double h = 0.0;
    double dh_dt = 0.0;
    double lf_h = 0.0;
    RowVec lg_h;

    /// dh/dt + L_f h + alpha(h), the u-independent part of Phi_nom.
    double phi_constant(double nu) const { return dh_dt + lf_h + nu * h; }
};

BarrierTerms barrier_terms(const ControlAffineSystem& sys, const BarrierSpec& bar,
                           const Vec& x, const Vec& xs, const Vec& xs_dot);

/// dh/dt + L_f h + L_g h u + alpha(h)
double phi_nominal(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                   const Vec& xs, const Vec& xs_dot, const Vec& u);

/// Phi_nom at the estimate plus the residual
/// -e_grad_h* ||f + g u|| + e_dhdt* + alpha(e_h*).
double phi_robust(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                  const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u);

void check_finite(const Vec& v, const std::string& what);

}  // namespace ercbf
