#include "ercbf/optim.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace ercbf::optim {

DenseQP::DenseQP(Mat H, Vec c, Mat A, Vec b)
    : H_(std::move(H)), c_(std::move(c)), A_(std::move(A)), b_(std::move(b)) {
    const auto d = c_.size();
    const auto k = b_.size();
    if (d < 1 || d > kMaxQpVars) {
        throw ShapeError(fmt::format("QP with {} variables; supported range is [1, {}]", d, kMaxQpVars));
    }
    if (k > kMaxQpConstraints) {
        throw ShapeError(fmt::format("QP with {} constraints; at most {} supported", k, kMaxQpConstraints));
    }
    if (H_.rows() != d || H_.cols() != d) {
        throw ShapeError(fmt::format("Hessian is {}x{}, expected {}x{}", H_.rows(), H_.cols(), d, d));
    }
    if (A_.rows() != k || (k > 0 && A_.cols() != d)) {
        throw ShapeError(fmt::format("constraint matrix is {}x{}, expected {}x{}", A_.rows(), A_.cols(), k, d));
    }
    if (k == 0) {
        A_.resize(0, d);
    }
    if (!H_.allFinite() || !c_.allFinite() || !A_.allFinite() || !b_.allFinite()) {
        throw std::invalid_argument("QP data contains non-finite entries");
    }
    const double scale = std::max(1.0, H_.cwiseAbs().maxCoeff());
    if ((H_ - H_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw std::invalid_argument("QP Hessian is not symmetric");
    }
    Eigen::LLT<Mat> llt(H_);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("QP Hessian is not positive definite");
    }
}

QpResult solve_qp(const DenseQP& qp) {
    const int d = qp.num_vars();
    const int k = qp.num_constraints();

    // Work with unit-norm constraint rows; multipliers are rescaled at the end.
    Mat A(k, d);
    Vec b(k);
    Vec row_scale(k);
    std::vector<bool> usable(k, true);
    for (int i = 0; i < k; ++i) {
        const double s = qp.A().row(i).norm();
        row_scale(i) = s;
        if (s <= 1e-300) {
            // 0 >= b_i: either always true or never.
            if (qp.b()(i) > kFeasibilityTol) {
                return {QpStatus::kInfeasible, Vec::Zero(d), Vec::Zero(k), {}};
            }
            usable[i] = false;
            A.row(i).setZero();
            b(i) = 0.0;
            continue;
        }
        A.row(i) = qp.A().row(i) / s;
        b(i) = qp.b()(i) / s;
    }

    const Eigen::LLT<Mat> llt(qp.H());
    const Mat Hinv = llt.solve(Mat::Identity(d, d));

    Vec z = -llt.solve(qp.c());
    std::vector<int> working;
    std::vector<double> duals;

    const int max_iter = 50 * (k + 1);
    for (int iter = 0;; ++iter) {
        if (iter > max_iter) {
            throw std::runtime_error("active-set QP did not terminate");
        }

        int p = -1;
        double worst = -kFeasibilityTol;
        for (int j = 0; j < k; ++j) {
            if (!usable[j] || std::find(working.begin(), working.end(), j) != working.end()) {
                continue;
            }
            const double s = A.row(j).dot(z) - b(j);
            if (s < worst) {
                worst = s;
                p = j;
            }
        }
        if (p < 0) {
            break;
        }

        std::vector<double> trial = duals;
        double trial_p = 0.0;
        const Vec np = A.row(p).transpose();

        for (int inner = 0;; ++inner) {
            if (inner > max_iter) {
                throw std::runtime_error("active-set QP did not terminate");
            }
            const int q = static_cast<int>(working.size());
            Vec step = Hinv * np;
            Vec r(q);
            if (q > 0) {
                Mat N(d, q);
                for (int j = 0; j < q; ++j) {
                    N.col(j) = A.row(working[j]).transpose();
                }
                const Mat M = N.transpose() * Hinv * N;
                r = M.ldlt().solve(N.transpose() * (Hinv * np));
                step -= Hinv * N * r;
            }

            int drop = -1;
            double t_dual = std::numeric_limits<double>::infinity();
            for (int j = 0; j < q; ++j) {
                if (r(j) > 0.0) {
                    const double t = trial[j] / r(j);
                    if (t < t_dual) {
                        t_dual = t;
                        drop = j;
                    }
                }
            }

            const double curvature = step.dot(np);
            const double ref = np.dot(Hinv * np);
            const double slack = b(p) - np.dot(z);

            if (curvature <= 1e-14 * ref) {
                // np is spanned by the working set.
                if (drop < 0) {
                    return {QpStatus::kInfeasible, z, Vec::Zero(k), {}};
                }
                for (int j = 0; j < q; ++j) {
                    trial[j] -= t_dual * r(j);
                }
                trial_p += t_dual;
                working.erase(working.begin() + drop);
                trial.erase(trial.begin() + drop);
                continue;
            }

            const double t_primal = slack / curvature;
            const double t = std::min(t_primal, t_dual);
            z += t * step;
            for (int j = 0; j < q; ++j) {
                trial[j] -= t * r(j);
            }
            trial_p += t;

            if (t_primal <= t_dual) {
                working.push_back(p);
                trial.push_back(trial_p);
                duals = std::move(trial);
                break;
            }
            working.erase(working.begin() + drop);
            trial.erase(trial.begin() + drop);
        }
    }

    QpResult out;
    out.status = QpStatus::kOptimal;
    out.z = z;
    out.multipliers = Vec::Zero(k);
    for (std::size_t j = 0; j < working.size(); ++j) {
        const int i = working[j];
        out.multipliers(i) = std::max(0.0, duals[j]) / row_scale(i);
    }
    out.active_set = working;
    std::sort(out.active_set.begin(), out.active_set.end());
    return out;
}

ScalarConeConstraint::ScalarConeConstraint(double a_, double b_, double cnorm_, Vec v0_, Vec v1_)
    : a(a_), b(b_), cnorm(cnorm_), v0(std::move(v0_)), v1(std::move(v1_)) {
    if (!(cnorm >= 0.0)) {
        throw std::invalid_argument("cone multiplier must be nonnegative");
    }
    if (v0.size() != v1.size()) {
        throw ShapeError(fmt::format("cone vectors differ in size: {} vs {}", v0.size(), v1.size()));
    }
}

double ScalarConeConstraint::residual(double u) const {
    return a + b * u - cnorm * (v0 + v1 * u).norm();
}

Interval Interval::intersect(const Interval& other) const {
    if (empty || other.empty) {
        return none();
    }
    const double l = std::max(lo, other.lo);
    const double h = std::min(hi, other.hi);
    if (l > h) {
        return none();
    }
    return {l, h, false};
}

Interval half_line(double b, double rhs) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (b > 0.0) {
        return {rhs / b, inf, false};
    }
    if (b < 0.0) {
        return {-inf, rhs / b, false};
    }
    return rhs <= kFeasibilityTol ? Interval::whole() : Interval::none();
}

namespace {

// Move a boundary point toward the interior until the residual is nonnegative.
double polish_endpoint(const ScalarConeConstraint& cone, double u, double inward) {
    for (int i = 0; i < 3; ++i) {
        const double r = cone.residual(u);
        const Vec w = cone.v0 + cone.v1 * u;
        const double nw = w.norm();
        if (nw == 0.0) {
            break;
        }
        const double dr = cone.b - cone.cnorm * w.dot(cone.v1) / nw;
        if (dr == 0.0) {
            break;
        }
        const double next = u - r / dr;
        if (!std::isfinite(next) || std::abs(cone.residual(next)) >= std::abs(r)) {
            break;
        }
        u = next;
    }
    double step = std::max(1.0, std::abs(u)) * std::numeric_limits<double>::epsilon();
    for (int i = 0; i < 64 && cone.residual(u) < 0.0; ++i) {
        u += inward * step;
        step *= 2.0;
    }
    return u;
}

}  // namespace

Interval feasible_interval(const ScalarConeConstraint& cone) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double k = cone.cnorm;
    if (k == 0.0) {
        return half_line(cone.b, -cone.a);
    }
    const double P = cone.v1.squaredNorm();
    const double Q = cone.v0.dot(cone.v1);
    const double R = cone.v0.squaredNorm();
    if (P == 0.0) {
        return half_line(cone.b, k * std::sqrt(R) - cone.a);
    }

    // Genuine boundary points are roots of (a + b u)^2 = k^2 ||v0 + v1 u||^2.
    // Squaring can add spurious roots; feasibility is decided by sampling the
    // open pieces between candidates, which is exact since the residual only
    // changes sign at genuine roots.
    const double qa = cone.b * cone.b - k * k * P;
    const double qb = 2.0 * (cone.a * cone.b - k * k * Q);
    const double qc = cone.a * cone.a - k * k * R;

    std::vector<double> candidates;
    const double coef_scale = cone.b * cone.b + k * k * P;
    if (std::abs(qa) > 1e-14 * coef_scale) {
        double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0) {
            disc = 0.0;
        }
        const double sq = std::sqrt(disc);
        const double t = -0.5 * (qb + std::copysign(sq, qb));
        if (t != 0.0) {
            candidates.push_back(t / qa);
            candidates.push_back(qc / t);
        } else {
            candidates.push_back(0.0);
        }
    } else if (qb != 0.0) {
        candidates.push_back(-qc / qb);
    }
    if (cone.b != 0.0) {
        candidates.push_back(-cone.a / cone.b);
    }
    // Vertex of ||v0 + v1 u||, where the residual may have a kink.
    candidates.push_back(-Q / P);
    std::erase_if(candidates, [](double c) { return !std::isfinite(c); });
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const auto n = candidates.size();
    // Piece j spans (candidates[j-1], candidates[j]) with +-inf at the ends.
    auto probe = [&](std::size_t j) {
        if (j == 0) {
            const double c = candidates.front();
            return c - std::max(1.0, std::abs(c));
        }
        if (j == n) {
            const double c = candidates.back();
            return c + std::max(1.0, std::abs(c));
        }
        return 0.5 * (candidates[j - 1] + candidates[j]);
    };

    int first = -1;
    int last = -1;
    for (std::size_t j = 0; j <= n; ++j) {
        if (cone.residual(probe(j)) >= 0.0) {
            if (first < 0) {
                first = static_cast<int>(j);
            }
            last = static_cast<int>(j);
        }
    }

    if (first < 0) {
        // Possibly a single tangent point.
        for (double c : candidates) {
            if (cone.residual(c) >= -kFeasibilityTol) {
                return {c, c, false};
            }
        }
        return Interval::none();
    }

    Interval out;
    out.lo = first == 0 ? -inf : candidates[static_cast<std::size_t>(first) - 1];
    out.hi = static_cast<std::size_t>(last) == n ? inf : candidates[static_cast<std::size_t>(last)];
    if (std::isfinite(out.lo)) {
        out.lo = polish_endpoint(cone, out.lo, +1.0);
    }
    if (std::isfinite(out.hi)) {
        out.hi = polish_endpoint(cone, out.hi, -1.0);
    }
    if (out.lo > out.hi) {
        const double mid = 0.5 * (out.lo + out.hi);
        out.lo = out.hi = mid;
    }
    return out;
}

std::optional<double> project_to_interval(double u_des, const Interval& interval) {
    if (interval.empty) {
        return std::nullopt;
    }
    return std::clamp(u_des, interval.lo, interval.hi);
}

double RotatedConeProgram::rotated_cone_slack(double u, double q) const {
    return (q + 1.0) - std::hypot(std::sqrt(2.0) * u, q - 1.0);
}

bool RotatedConeProgram::feasible(double u, double q, double tol) const {
    return q >= -tol && rotated_cone_slack(u, q) >= -tol && cone.residual(u) >= -tol;
}

RotatedConeProgram to_rotated_cone(const ScalarConeConstraint& cone, double u_des) {
    return RotatedConeProgram{u_des, cone};
}

}  // namespace ercbf::optim
