#include "ercbf/worst_case.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

namespace ercbf {

void ErrorBounds::validate() const {
    if (E_s.size() != E_s_dot.size()) {
        throw ShapeError(fmt::format("error bounds: E_s has {} entries, E_s_dot has {}", E_s.size(),
                                     E_s_dot.size()));
    }
    for (int i = 0; i < E_s.size(); ++i) {
        if (!(E_s(i) >= 0.0) || !(E_s_dot(i) >= 0.0) || !std::isfinite(E_s(i)) ||
            !std::isfinite(E_s_dot(i))) {
            throw std::invalid_argument("error bounds must be finite and nonnegative");
        }
    }
}

ErrorBounds ErrorBounds::zero(int p) {
    return {Vec::Zero(p), Vec::Zero(p)};
}

namespace {

constexpr int kMaxActiveCoords = 10;
constexpr double kGridBudget = 5e7;

// Evaluates an expression on the stacked error vector [e_s; e_s_dot].
class BoxFunction {
public:
    BoxFunction(const ErrorExpression& expr, const Vec& x, const EnvironmentEstimate& est, int p,
                bool squared)
        : expr_(expr), x_(x), est_(est), p_(p), squared_(squared) {}

    double operator()(const Eigen::VectorXd& e) const {
        e_s_ = e.head(p_);
        e_s_dot_ = e.tail(p_);
        const double v = expr_.fn(ErrorSample{x_, est_.xs_hat, est_.xs_hat_dot, e_s_, e_s_dot_});
        return squared_ ? v * v : v;
    }

    ErrorPoint point(const Eigen::VectorXd& e) const { return {e.head(p_), e.tail(p_)}; }

private:
    const ErrorExpression& expr_;
    const Vec& x_;
    const EnvironmentEstimate& est_;
    int p_;
    bool squared_;
    mutable Vec e_s_;
    mutable Vec e_s_dot_;
};

struct Tracker {
    Extrema out;
    bool seen = false;

    void offer(double v, const BoxFunction& fn, const Eigen::VectorXd& e) {
        if (!seen || v < out.min.value) {
            out.min = {v, fn.point(e)};
        }
        if (!seen || v > out.max.value) {
            out.max = {v, fn.point(e)};
        }
        seen = true;
    }
};

Extrema extremize_quadratic(const BoxFunction& fn, const Eigen::VectorXd& width,
                            const std::vector<int>& active) {
    const int n_total = static_cast<int>(width.size());
    const int n = static_cast<int>(active.size());
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n_total);

    const double f0 = fn(e);
    Tracker track;
    track.offer(f0, fn, e);
    if (n == 0) {
        return track.out;
    }

    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) {
        w(i) = width(active[i]);
    }

    auto eval_at = [&](const Eigen::VectorXd& y) {
        e.setZero();
        for (int i = 0; i < n; ++i) {
            e(active[i]) = y(i);
        }
        return fn(e);
    };

    // Quadratic model f0 + g'y + 1/2 y'Hy from face-centre evaluations.
    Eigen::VectorXd g(n);
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    double scale = std::abs(f0);
    for (int i = 0; i < n; ++i) {
        y.setZero();
        y(i) = w(i);
        const double fp = eval_at(y);
        y(i) = -w(i);
        const double fm = eval_at(y);
        g(i) = (fp - fm) / (2.0 * w(i));
        H(i, i) = (fp - 2.0 * f0 + fm) / (w(i) * w(i));
        scale = std::max({scale, std::abs(fp), std::abs(fm)});
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (int si : {1, -1}) {
                for (int sj : {1, -1}) {
                    y.setZero();
                    y(i) = si * w(i);
                    y(j) = sj * w(j);
                    const double v = eval_at(y);
                    acc += si * sj * v;
                    scale = std::max(scale, std::abs(v));
                }
            }
            H(i, j) = H(j, i) = acc / (4.0 * w(i) * w(j));
        }
    }
    auto model = [&](const Eigen::VectorXd& yy) { return f0 + g.dot(yy) + 0.5 * yy.dot(H * yy); };

    // Faces: each active coordinate is at -w (0), +w (1) or free (2).
    std::vector<int> state(n, 0);
    int faces = 1;
    for (int i = 0; i < n; ++i) {
        faces *= 3;
    }
    for (int face = 0; face < faces; ++face) {
        int code = face;
        std::vector<int> free_idx;
        for (int i = 0; i < n; ++i) {
            state[i] = code % 3;
            code /= 3;
            if (state[i] == 2) {
                free_idx.push_back(i);
            } else {
                y(i) = state[i] == 0 ? -w(i) : w(i);
            }
        }

        if (free_idx.empty()) {
            const double v = eval_at(y);
            const double tol = 1e-7 * (1.0 + std::max(scale, std::abs(v)));
            if (std::abs(model(y) - v) > tol) {
                throw UnsupportedDegreeError(
                    "error expression declared at most quadratic does not match its quadratic model");
            }
            e.setZero();
            for (int i = 0; i < n; ++i) {
                e(active[i]) = y(i);
            }
            track.offer(v, fn, e);
            continue;
        }

        const int nf = static_cast<int>(free_idx.size());
        Eigen::MatrixXd Hff(nf, nf);
        Eigen::VectorXd rhs(nf);
        for (int a = 0; a < nf; ++a) {
            const int ia = free_idx[a];
            double r = -g(ia);
            for (int j = 0; j < n; ++j) {
                if (state[j] != 2) {
                    r -= H(ia, j) * y(j);
                }
            }
            rhs(a) = r;
            for (int b = 0; b < nf; ++b) {
                Hff(a, b) = H(ia, free_idx[b]);
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(Hff);
        lu.setThreshold(1e-10);
        if (lu.rank() < nf) {
            // A singular face either has no stationary point or a flat set of
            // them whose extreme values also appear on lower-dimensional faces.
            continue;
        }
        const Eigen::VectorXd sol = lu.solve(rhs);
        bool inside = true;
        for (int a = 0; a < nf; ++a) {
            const double bound = w(free_idx[a]);
            if (!(std::abs(sol(a)) <= bound * (1.0 + 1e-12))) {
                inside = false;
                break;
            }
            y(free_idx[a]) = std::clamp(sol(a), -bound, bound);
        }
        if (!inside) {
            continue;
        }
        e.setZero();
        for (int i = 0; i < n; ++i) {
            e(active[i]) = y(i);
        }
        track.offer(fn(e), fn, e);
    }
    return track.out;
}

Extrema extremize_grid(const BoxFunction& fn, const Eigen::VectorXd& width,
                       const std::vector<int>& active, double fraction) {
    const int n = static_cast<int>(active.size());
    const int per_axis = static_cast<int>(std::ceil(1.0 / fraction)) + 1;
    if (std::pow(static_cast<double>(per_axis), n) > kGridBudget) {
        throw std::invalid_argument(
            fmt::format("grid extremization over {} coordinates with {} points per axis is too large", n,
                        per_axis));
    }
    Eigen::VectorXd e = Eigen::VectorXd::Zero(width.size());
    Tracker track;
    std::vector<int> idx(n, 0);
    while (true) {
        for (int i = 0; i < n; ++i) {
            const double w = width(active[i]);
            e(active[i]) = -w + 2.0 * w * idx[i] / (per_axis - 1);
        }
        track.offer(fn(e), fn, e);
        int i = 0;
        while (i < n && ++idx[i] == per_axis) {
            idx[i] = 0;
            ++i;
        }
        if (i == n) {
            break;
        }
    }
    if (!track.seen) {
        track.offer(fn(e), fn, e);
    }
    return track.out;
}

}  // namespace

Extrema extremize(const ErrorExpression& expr, const ErrorBounds& bounds, const Vec& x,
                  const EnvironmentEstimate& est, const ExtremizerOptions& opts) {
    bounds.validate();
    const int p = bounds.env_dim();
    if (est.xs_hat.size() != p || est.xs_hat_dot.size() != p) {
        throw ShapeError(fmt::format("error bounds have dimension {}, estimate has {}", p, est.xs_hat.size()));
    }
    if (!expr.fn) {
        throw std::invalid_argument("error expression has no function");
    }

    Eigen::VectorXd width(2 * p);
    width << bounds.E_s, bounds.E_s_dot;
    std::vector<int> active;
    for (int i = 0; i < 2 * p; ++i) {
        if (width(i) > 0.0) {
            active.push_back(i);
        }
    }

    switch (expr.cls) {
    case ExpressionClass::kPolynomial: {
        if (expr.degree > 2) {
            throw UnsupportedDegreeError(
                fmt::format("polynomial error expressions of degree {} are not supported (max 2)", expr.degree));
        }
        break;
    }
    case ExpressionClass::kNormOfAffine: {
        if (expr.degree > 1) {
            throw UnsupportedDegreeError(
                fmt::format("norm expressions must wrap an affine map, got degree {}", expr.degree));
        }
        break;
    }
    case ExpressionClass::kNonPolynomial: {
        const BoxFunction fn(expr, x, est, p, false);
        return extremize_grid(fn, width, active, opts.grid_fraction);
    }
    }

    if (static_cast<int>(active.size()) > kMaxActiveCoords) {
        throw std::invalid_argument(
            fmt::format("{} active error coordinates exceed the face-enumeration limit of {}", active.size(),
                        kMaxActiveCoords));
    }

    const bool squared = expr.cls == ExpressionClass::kNormOfAffine;
    const BoxFunction fn(expr, x, est, p, squared);
    Extrema out = extremize_quadratic(fn, width, active);
    if (squared) {
        out.min.value = std::sqrt(std::max(0.0, out.min.value));
        out.max.value = std::sqrt(std::max(0.0, out.max.value));
    }
    return out;
}

WorstCaseAnalysis analyze_worst_case(const ErrorExpressions& exprs, const ErrorBounds& bounds,
                                     const Vec& x, const EnvironmentEstimate& est,
                                     const ExtremizerOptions& opts) {
    const Extrema eh = extremize(exprs.h, bounds, x, est, opts);
    const Extrema eg = extremize(exprs.grad_h, bounds, x, est, opts);
    const Extrema et = extremize(exprs.dh_dt, bounds, x, est, opts);

    WorstCaseAnalysis out;
    out.values.e_h_star = eh.min.value;
    out.values.e_grad_h_star = std::max(0.0, eg.max.value);
    out.values.e_dhdt_star = et.min.value;
    out.argmin_h = eh.min.at;
    out.argmax_grad_h = eg.max.at;
    out.argmin_dh_dt = et.min.at;

    auto attains_all = [&](const ErrorPoint& pt) {
        const ErrorSample s{x, est.xs_hat, est.xs_hat_dot, pt.e_s, pt.e_s_dot};
        auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(b)); };
        return close(exprs.h.fn(s), out.values.e_h_star) &&
               close(std::abs(exprs.grad_h.fn(s)), out.values.e_grad_h_star) &&
               close(exprs.dh_dt.fn(s), out.values.e_dhdt_star);
    };
    out.common_optimizer =
        attains_all(out.argmin_h) || attains_all(out.argmax_grad_h) || attains_all(out.argmin_dh_dt);
    return out;
}

WorstCaseErrors worst_case_errors(const ErrorExpressions& exprs, const ErrorBounds& bounds,
                                  const Vec& x, const EnvironmentEstimate& est,
                                  const ExtremizerOptions& opts) {
    const Extrema eh = extremize(exprs.h, bounds, x, est, opts);
    const Extrema eg = extremize(exprs.grad_h, bounds, x, est, opts);
    const Extrema et = extremize(exprs.dh_dt, bounds, x, est, opts);
    return {eh.min.value, std::max(0.0, eg.max.value), et.min.value};
}

}  // namespace ercbf
