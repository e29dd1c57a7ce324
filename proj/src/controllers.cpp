#include "ercbf/controllers.hpp"

#include <cmath>

#include <fmt/format.h>

namespace ercbf {

namespace {

void require_scalar_input(const ControlAffineSystem& sys, const char* what) {
    if (sys.input_dim() != 1) {
        throw ShapeError(fmt::format("{} requires a scalar input, system has m = {}", what, sys.input_dim()));
    }
}

Vec scalar(double v) {
    Vec u(1);
    u(0) = v;
    return u;
}

bool satisfies(std::span<const HalfSpace> extra, const Vec& u) {
    for (const auto& hs : extra) {
        if (hs.normal.dot(u) < hs.offset) {
            return false;
        }
    }
    return true;
}

void append_rows(Mat& A, Vec& b, int& row, std::span<const HalfSpace> extra, int cols) {
    for (const auto& hs : extra) {
        if (hs.normal.size() != cols) {
            throw ShapeError(fmt::format("half-space normal has {} entries, input has {}", hs.normal.size(), cols));
        }
        A.row(row).setZero();
        A.row(row).head(cols) = hs.normal;
        b(row) = hs.offset;
        ++row;
    }
}

}  // namespace

HalfSpace nominal_halfspace(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                            const Vec& xs, const Vec& xs_dot) {
    const BarrierTerms t = barrier_terms(sys, bar, x, xs, xs_dot);
    return {t.lg_h, -t.phi_constant(bar.nu)};
}

Vec clf_desired_input(const ControlAffineSystem& sys, const LyapunovSpec& lyap, const Vec& x) {
    const Vec grad = lyap.grad_V(x);
    if (grad.size() != sys.state_dim()) {
        throw ShapeError("CLF gradient dimension does not match the state");
    }
    const double lf_v = grad.dot(sys.drift(x));
    const RowVec lg_v = grad.transpose() * sys.input_matrix(x);
    const double excess = lf_v + lyap.c3 * lyap.V(x);
    if (excess <= 0.0) {
        return Vec::Zero(sys.input_dim());
    }
    const double n2 = lg_v.squaredNorm();
    if (n2 == 0.0) {
        throw ClfInfeasibleError("L_g V vanishes while the CLF decrease condition is violated");
    }
    return -excess * lg_v.transpose() / n2;
}

SoftClfResult clf_soft_qp(const ControlAffineSystem& sys, const LyapunovSpec& lyap,
                          std::span<const BarrierSpec> barriers, const Vec& x, const Vec& xs,
                          const Vec& xs_dot, double weight, std::span<const HalfSpace> extra) {
    if (!(weight > 0.0)) {
        throw std::invalid_argument("CLF slack weight must be positive");
    }
    const int m = sys.input_dim();
    const int d = m + 1;
    const int k = 1 + static_cast<int>(barriers.size() + extra.size());

    Mat H = Mat::Identity(d, d);
    H(m, m) = weight;
    Mat A = Mat::Zero(k, d);
    Vec b(k);

    const Vec grad = lyap.grad_V(x);
    const double lf_v = grad.dot(sys.drift(x));
    const RowVec lg_v = grad.transpose() * sys.input_matrix(x);
    // delta - L_g V u >= L_f V + c3 V
    A.row(0).head(m) = -lg_v;
    A(0, m) = 1.0;
    b(0) = lf_v + lyap.c3 * lyap.V(x);

    int row = 1;
    for (const auto& bar : barriers) {
        const HalfSpace hs = nominal_halfspace(sys, bar, x, xs, xs_dot);
        A.row(row).head(m) = hs.normal;
        b(row) = hs.offset;
        ++row;
    }
    append_rows(A, b, row, extra, m);

    const optim::QpResult qp = optim::solve_qp(optim::DenseQP(H, Vec::Zero(d), A, b));
    SoftClfResult out;
    if (!qp.optimal()) {
        out.status = FilterStatus::kInfeasible;
        out.u = Vec::Zero(m);
        return out;
    }
    out.u = qp.z.head(m);
    out.slack = qp.z(m);
    return out;
}

FilterResult cbf_qp_closed_form(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                                const Vec& xs, const Vec& xs_dot, const Vec& u_des) {
    const BarrierTerms t = barrier_terms(sys, bar, x, xs, xs_dot);
    if (u_des.size() != sys.input_dim()) {
        throw ShapeError("desired input dimension does not match the system");
    }
    const double n2 = t.lg_h.squaredNorm();
    if (n2 == 0.0) {
        throw DegenerateError("L_g h vanishes; the closed-form CBF-QP is undefined");
    }
    const double phi_des = t.phi_constant(bar.nu) + t.lg_h.dot(u_des);

    FilterResult out;
    if (phi_des >= 0.0) {
        out.u = u_des;
        out.branch = FilterBranch::kUnconstrained;
    } else {
        out.u = u_des - t.lg_h.transpose() * (phi_des / n2);
        out.branch = FilterBranch::kConstrained;
    }
    out.phi_value = t.phi_constant(bar.nu) + t.lg_h.dot(out.u);
    return out;
}

FilterResult cbf_qp_numeric(const ControlAffineSystem& sys, std::span<const BarrierSpec> barriers,
                            const Vec& x, const Vec& xs, const Vec& xs_dot, const Vec& u_des,
                            std::span<const HalfSpace> extra) {
    if (barriers.empty()) {
        throw std::invalid_argument("cbf_qp_numeric needs at least one barrier");
    }
    const int m = sys.input_dim();
    if (u_des.size() != m) {
        throw ShapeError("desired input dimension does not match the system");
    }
    const int k = static_cast<int>(barriers.size() + extra.size());
    Mat A(k, m);
    Vec b(k);
    int row = 0;
    for (const auto& bar : barriers) {
        const HalfSpace hs = nominal_halfspace(sys, bar, x, xs, xs_dot);
        A.row(row) = hs.normal;
        b(row) = hs.offset;
        ++row;
    }
    append_rows(A, b, row, extra, m);

    const optim::QpResult qp = optim::solve_qp(optim::DenseQP(Mat::Identity(m, m), -u_des, A, b));
    FilterResult out;
    if (!qp.optimal()) {
        out.status = FilterStatus::kInfeasible;
        out.u = u_des;
        out.phi_value = phi_nominal(sys, barriers.front(), x, xs, xs_dot, u_des);
        return out;
    }
    out.u = qp.z;
    out.branch = qp.active_set.empty() ? FilterBranch::kUnconstrained : FilterBranch::kConstrained;
    out.phi_value = A.row(0).dot(out.u) - b(0);
    return out;
}

optim::ScalarConeConstraint robust_cone(const ControlAffineSystem& sys, const BarrierSpec& bar,
                                        const Vec& x, const EnvironmentEstimate& est,
                                        const WorstCaseErrors& wce) {
    require_scalar_input(sys, "the robust cone constraint");
    if (!(wce.e_grad_h_star >= 0.0)) {
        throw std::invalid_argument("e_grad_h* must be nonnegative");
    }
    const BarrierTerms t = barrier_terms(sys, bar, x, est.xs_hat, est.xs_hat_dot);
    const double a = t.phi_constant(bar.nu) + wce.e_dhdt_star + bar.alpha(wce.e_h_star);
    return {a, t.lg_h(0), wce.e_grad_h_star, sys.drift(x), sys.input_matrix(x).col(0)};
}

FilterResult er_cbf_socp(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                         const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u_des,
                         std::span<const HalfSpace> extra) {
    const optim::ScalarConeConstraint cone = robust_cone(sys, bar, x, est, wce);
    if (u_des.size() != 1) {
        throw ShapeError("desired input must be scalar");
    }

    FilterResult out;
    const double ud = u_des(0);
    if (cone.residual(ud) >= 0.0 && satisfies(extra, u_des)) {
        out.u = u_des;
        out.phi_value = cone.residual(ud);
        return out;
    }

    optim::Interval feasible = optim::feasible_interval(cone);
    for (const auto& hs : extra) {
        if (hs.normal.size() != 1) {
            throw ShapeError("half-space normal must be scalar");
        }
        feasible = feasible.intersect(optim::half_line(hs.normal(0), hs.offset));
    }
    const std::optional<double> u = optim::project_to_interval(ud, feasible);
    if (!u) {
        out.status = FilterStatus::kInfeasible;
        out.u = u_des;
        out.phi_value = cone.residual(ud);
        return out;
    }
    out.u = scalar(*u);
    out.branch = *u == ud ? FilterBranch::kUnconstrained : FilterBranch::kConstrained;
    out.phi_value = cone.residual(*u);
    out.u_delta = *u - ud;
    return out;
}

double u_delta_bound(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                     const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u_nom) {
    require_scalar_input(sys, "u_delta_bound");
    const double phi = phi_robust(sys, bar, x, est, wce, u_nom);
    if (phi >= 0.0) {
        return 0.0;
    }
    const BarrierTerms t = barrier_terms(sys, bar, x, est.xs_hat, est.xs_hat_dot);
    const double spread = wce.e_grad_h_star * sys.input_matrix(x).norm();
    const double plus = t.lg_h(0) + spread;
    const double minus = t.lg_h(0) - spread;
    if (std::abs(plus) < 1e-12 || std::abs(minus) < 1e-12) {
        throw DegenerateError(
            fmt::format("u_delta bound undefined: L_g h = {} equals +-e_grad_h* ||g|| = {}", t.lg_h(0), spread));
    }
    return std::max(std::abs(-phi / plus), std::abs(-phi / minus));
}

double phi_robust_hat(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                      const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u_nom,
                      double u_delta_bar, const Vec& u) {
    const double nominal = phi_nominal(sys, bar, x, est.xs_hat, est.xs_hat_dot, u);
    const double norm_bound = sys.velocity(x, u_nom).norm() + u_delta_bar * sys.input_matrix(x).norm();
    return nominal - wce.e_grad_h_star * norm_bound + wce.e_dhdt_star + bar.alpha(wce.e_h_star);
}

FilterResult er_cbf_qp(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                       const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u_nom,
                       std::span<const HalfSpace> extra) {
    require_scalar_input(sys, "er_cbf_qp");
    const double ubar = u_delta_bound(sys, bar, x, est, wce, u_nom);
    const BarrierTerms t = barrier_terms(sys, bar, x, est.xs_hat, est.xs_hat_dot);
    const double constant = phi_robust_hat(sys, bar, x, est, wce, u_nom, ubar, Vec::Zero(1));

    const int k = 1 + static_cast<int>(extra.size());
    Mat A(k, 1);
    Vec b(k);
    A(0, 0) = t.lg_h(0);
    b(0) = -constant;
    int row = 1;
    append_rows(A, b, row, extra, 1);

    const optim::QpResult qp = optim::solve_qp(optim::DenseQP(Mat::Identity(1, 1), -u_nom, A, b));
    FilterResult out;
    out.u_delta_bar = ubar;
    if (!qp.optimal()) {
        out.status = FilterStatus::kInfeasible;
        out.u = u_nom;
        out.phi_value = constant + t.lg_h(0) * u_nom(0);
        return out;
    }
    out.u = qp.z;
    out.branch = qp.active_set.empty() ? FilterBranch::kUnconstrained : FilterBranch::kConstrained;
    out.phi_value = constant + t.lg_h(0) * out.u(0);
    out.u_delta = out.u(0) - u_nom(0);
    return out;
}

FilterResult er_cbf_qp_closed_form(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                                   const EnvironmentEstimate& est, const WorstCaseErrors& wce,
                                   const Vec& u_nom) {
    require_scalar_input(sys, "er_cbf_qp_closed_form");
    const BarrierTerms t = barrier_terms(sys, bar, x, est.xs_hat, est.xs_hat_dot);
    const double lg = t.lg_h(0);
    if (lg == 0.0) {
        throw DegenerateError("L_g h vanishes at the estimate; the robust closed form is undefined");
    }
    const double ubar = u_delta_bound(sys, bar, x, est, wce, u_nom);
    const double phi_hat = phi_robust_hat(sys, bar, x, est, wce, u_nom, ubar, u_nom);

    FilterResult out;
    out.u_delta_bar = ubar;
    if (phi_hat >= 0.0) {
        out.u = u_nom;
        out.phi_value = phi_hat;
        return out;
    }
    out.u_delta = -phi_hat / lg;
    out.u = scalar(u_nom(0) + out.u_delta);
    out.branch = FilterBranch::kConstrained;
    out.phi_value = phi_robust_hat(sys, bar, x, est, wce, u_nom, ubar, out.u);
    return out;
}

}  // namespace ercbf
