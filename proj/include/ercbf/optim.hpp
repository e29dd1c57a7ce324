#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "ercbf/core.hpp"

namespace ercbf::optim {

/// Fixed solver tolerances.
inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kStationarityTol = 1e-8;

inline constexpr int kMaxQpVars = 4;
inline constexpr int kMaxQpConstraints = 8;

/// min 1/2 z'Hz + c'z  s.t.  A z >= b.
/// H must be symmetric positive definite; checked at construction.
class DenseQP {
public:
    DenseQP(Mat H, Vec c, Mat A, Vec b);

    int num_vars() const { return static_cast<int>(c_.size()); }
    int num_constraints() const { return static_cast<int>(b_.size()); }

    const Mat& H() const { return H_; }
    const Vec& c() const { return c_; }
    const Mat& A() const { return A_; }
    const Vec& b() const { return b_; }

private:
    Mat H_;
    Vec c_;
    Mat A_;
    Vec b_;
};

enum class QpStatus { kOptimal, kInfeasible };

struct QpResult {
    QpStatus status = QpStatus::kInfeasible;
    Vec z;
    /// Multipliers for every constraint row (zero for inactive rows).
    Vec multipliers;
    /// Constraint indices in the final working set, ascending.
    std::vector<int> active_set;

    bool optimal() const { return status == QpStatus::kOptimal; }
};

/// Dual active-set method (Goldfarb-Idnani). The most violated constraint
/// enters first; ties go to the lowest index.
QpResult solve_qp(const DenseQP& qp);

/// a + b u - cnorm * ||v0 + v1 u|| >= 0 for scalar u.
struct ScalarConeConstraint {
    double a = 0.0;
    double b = 0.0;
    double cnorm = 0.0;
    Vec v0;
    Vec v1;

    ScalarConeConstraint(double a, double b, double cnorm, Vec v0, Vec v1);

    double residual(double u) const;
};

/// Closed interval of the real line, possibly empty or unbounded on either side.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool empty = false;

    static Interval whole() { return {}; }
    static Interval none() { return {0.0, 0.0, true}; }

    bool bounded_below() const { return !empty && lo > -std::numeric_limits<double>::infinity(); }
    bool bounded_above() const { return !empty && hi < std::numeric_limits<double>::infinity(); }
    bool contains(double u) const { return !empty && u >= lo && u <= hi; }

    Interval intersect(const Interval& other) const;
};

/// {u : b u >= rhs} as an interval.
Interval half_line(double b, double rhs);

/// Exact feasible set of the scalar cone constraint. Endpoints are polished
/// so that the constraint residual at each finite endpoint is nonnegative
/// (up to -kFeasibilityTol).
Interval feasible_interval(const ScalarConeConstraint& cone);

/// Euclidean projection onto the interval; nullopt when it is empty.
std::optional<double> project_to_interval(double u_des, const Interval& interval);

/// Epigraph form of min ||u - u_des||^2 over the cone constraint, with the
/// quadratic bound 1/2 u^2 <= q written as a rotated second-order cone
/// ||[sqrt(2) u, q - 1]|| <= q + 1. Used to check that the rewrite keeps the
/// optimizer of the projection formulation.
struct RotatedConeProgram {
    double u_des = 0.0;
    ScalarConeConstraint cone;

    /// q - u_des * u
    double objective(double u, double q) const { return q - u_des * u; }
    /// (q + 1) - ||[sqrt(2) u, q - 1]||
    double rotated_cone_slack(double u, double q) const;
    bool feasible(double u, double q, double tol = kFeasibilityTol) const;
    /// Smallest q admitted by the rotated cone for the given u.
    static double tight_q(double u) { return 0.5 * u * u; }
};

RotatedConeProgram to_rotated_cone(const ScalarConeConstraint& cone, double u_des);

}  // namespace ercbf::optim
