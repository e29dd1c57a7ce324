#pragma once

#include <functional>

#include "ercbf/core.hpp"

namespace ercbf {

/// Componentwise bounds |e_s| <= E_s, |e_s_dot| <= E_s_dot.
struct ErrorBounds {
    Vec E_s;
    Vec E_s_dot;

    int env_dim() const { return static_cast<int>(E_s.size()); }
    void validate() const;
    static ErrorBounds zero(int p);
};

/// Everything an error expression may depend on.
struct ErrorSample {
    const Vec& x;
    const Vec& xs_hat;
    const Vec& xs_hat_dot;
    const Vec& e_s;
    const Vec& e_s_dot;
};

enum class ExpressionClass {
    /// Polynomial in the error coordinates of the declared total degree.
    kPolynomial,
    /// Euclidean norm of an expression affine in the errors (its square is quadratic).
    kNormOfAffine,
    /// Anything else; extremized on a grid, which is not a certified bound.
    kNonPolynomial,
};

struct ErrorExpression {
    std::function<double(const ErrorSample&)> fn;
    ExpressionClass cls = ExpressionClass::kPolynomial;
    int degree = 2;
};

/// Scenario-supplied errors of h, of grad_x h (as a norm) and of dh/dt.
struct ErrorExpressions {
    ErrorExpression h;
    ErrorExpression grad_h;
    ErrorExpression dh_dt;
};

class UnsupportedDegreeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ErrorPoint {
    Vec e_s;
    Vec e_s_dot;
};

struct Extremum {
    double value = 0.0;
    ErrorPoint at;
};

struct Extrema {
    Extremum min;
    Extremum max;
};

struct ExtremizerOptions {
    /// Grid spacing for non-polynomial expressions, as a fraction of each box width.
    double grid_fraction = 1e-2;
};

/// Minimum and maximum of an error expression over the error box.
///
/// Quadratic expressions are handled exactly: the quadratic model is
/// recovered from evaluations at face centres, then every face of the box
/// (vertices included) is searched for a stationary point of the model
/// restricted to it. Candidates are scored with the expression itself and
/// the model is checked against the expression at every vertex.
Extrema extremize(const ErrorExpression& expr, const ErrorBounds& bounds, const Vec& x,
                  const EnvironmentEstimate& est, const ExtremizerOptions& opts = {});

struct WorstCaseAnalysis {
    WorstCaseErrors values;
    ErrorPoint argmin_h;
    ErrorPoint argmax_grad_h;
    ErrorPoint argmin_dh_dt;

    /// True when one of the three extremizers attains all three extremal
    /// values (the tightness condition for the u_delta bound). Informational.
    bool common_optimizer = false;
};

WorstCaseAnalysis analyze_worst_case(const ErrorExpressions& exprs, const ErrorBounds& bounds,
                                     const Vec& x, const EnvironmentEstimate& est,
                                     const ExtremizerOptions& opts = {});

WorstCaseErrors worst_case_errors(const ErrorExpressions& exprs, const ErrorBounds& bounds,
                                  const Vec& x, const EnvironmentEstimate& est,
                                  const ExtremizerOptions& opts = {});

}  // namespace ercbf
