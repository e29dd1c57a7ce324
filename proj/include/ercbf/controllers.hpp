#pragma once

#include <span>
#include <vector>

#include "ercbf/core.hpp"
#include "ercbf/optim.hpp"
#include "ercbf/worst_case.hpp"

namespace ercbf {

/// normal . u >= offset
struct HalfSpace {
    RowVec normal;
    double offset = 0.0;
};

enum class FilterStatus { kOptimal, kInfeasible };
enum class FilterBranch { kUnconstrained, kConstrained };

struct FilterResult {
    Vec u;
    FilterStatus status = FilterStatus::kOptimal;
    FilterBranch branch = FilterBranch::kUnconstrained;
    /// Governing constraint (Phi_nom, Phi_rob or its input-independent
    /// variant) evaluated at u.
    double phi_value = 0.0;
    /// u - u_reference, for the robust filters.
    double u_delta = 0.0;
    /// Upper bound on |u_delta| used by er_cbf_qp; 0 elsewhere.
    double u_delta_bar = 0.0;

    bool optimal() const { return status == FilterStatus::kOptimal; }
};

class ClfInfeasibleError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Phi_nom(u) >= 0 written as a half-space in u.
HalfSpace nominal_halfspace(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                            const Vec& xs, const Vec& xs_dot);

/// Minimum-norm input with L_f V + L_g V u + c3 V <= 0.
Vec clf_desired_input(const ControlAffineSystem& sys, const LyapunovSpec& lyap, const Vec& x);

struct SoftClfResult {
    Vec u;
    double slack = 0.0;
    FilterStatus status = FilterStatus::kOptimal;
};

/// CLF decrease as a soft constraint: min 1/2 ||u||^2 + 1/2 w delta^2 subject to
/// L_f V + L_g V u + c3 V <= delta and Phi_nom >= 0 for every barrier.
SoftClfResult clf_soft_qp(const ControlAffineSystem& sys, const LyapunovSpec& lyap,
                         std::span<const BarrierSpec> barriers, const Vec& x, const Vec& xs,
                         const Vec& xs_dot, double weight, std::span<const HalfSpace> extra = {});

/// Closed-form solution of min ||u - u_des||^2 s.t. Phi_nom(u) >= 0.
FilterResult cbf_qp_closed_form(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                                const Vec& xs, const Vec& xs_dot, const Vec& u_des);

/// min ||u - u_des||^2 s.t. Phi_nom >= 0 for every barrier and the extra
/// half-spaces. phi_value reports the first barrier.
FilterResult cbf_qp_numeric(const ControlAffineSystem& sys, std::span<const BarrierSpec> barriers,
                            const Vec& x, const Vec& xs, const Vec& xs_dot, const Vec& u_des,
                            std::span<const HalfSpace> extra = {});

/// Phi_rob(u) >= 0 as a scalar cone constraint (m = 1).
optim::ScalarConeConstraint robust_cone(const ControlAffineSystem& sys, const BarrierSpec& bar,
                                        const Vec& x, const EnvironmentEstimate& est,
                                        const WorstCaseErrors& wce);

/// min (u - u_des)^2 s.t. Phi_rob(u) >= 0 and the extra half-spaces, for
/// scalar input. No slack is added: an empty feasible set is reported.
FilterResult er_cbf_socp(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                         const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u_des,
                         std::span<const HalfSpace> extra = {});

/// Bound on |u_rob - u_nom| for the robust program fed with u_nom.
double u_delta_bound(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                     const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u_nom);

/// Robust constraint with the input-dependent norm replaced by its bound at
/// u_nom:  Phi_nom(x, xs_hat, u) - e_grad_h*(||f + g u_nom|| + u_delta_bar ||g||)
///         + e_dhdt* + alpha(e_h*).
double phi_robust_hat(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                      const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u_nom,
                      double u_delta_bar, const Vec& u);

/// min (u - u_nom)^2 s.t. phi_robust_hat(u) >= 0 and the extra half-spaces.
FilterResult er_cbf_qp(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                       const EnvironmentEstimate& est, const WorstCaseErrors& wce, const Vec& u_nom,
                       std::span<const HalfSpace> extra = {});

/// Two-branch closed form of er_cbf_qp without extra constraints.
FilterResult er_cbf_qp_closed_form(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vec& x,
                                   const EnvironmentEstimate& est, const WorstCaseErrors& wce,
                                   const Vec& u_nom);

}  // namespace ercbf
