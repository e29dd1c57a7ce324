#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ercbf/controllers.hpp"
#include "ercbf/core.hpp"

namespace ercbf::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin() { return std::bernoulli_distribution(0.5)(rng_); }

    Vec vec(int n, double lo, double hi) {
        Vec v(n);
        for (int i = 0; i < n; ++i) {
            v(i) = uniform(lo, hi);
        }
        return v;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline Vec scalar(double v) {
    Vec u(1);
    u(0) = v;
    return u;
}

/// Two-state, scalar-input system with constant drift and input column,
/// and an affine barrier h = w.x + k.xs + c. Every Lie derivative is a
/// constant, so closed forms and solvers can be compared exactly.
struct AffineInstance {
    ControlAffineSystem sys;
    BarrierSpec bar;
    Vec x;
    Vec xs;
    Vec xs_dot;
    Vec f;
    Vec g;
    Vec w;
    Vec k;
    double c = 0.0;
};

inline AffineInstance affine_instance(Gen& gen, int m = 1) {
    const int n = 2;
    Vec f = gen.vec(n, -3.0, 3.0);
    Mat G(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            G(i, j) = gen.uniform(-2.0, 2.0);
        }
    }
    Vec w = gen.vec(n, -2.0, 2.0);
    Vec k = gen.vec(n, -1.0, 1.0);
    const double c = gen.uniform(-2.0, 2.0);
    BarrierSpec bar;
    bar.nu = gen.uniform(0.5, 5.0);
    bar.h = [w, k, c](const Vec& x, const Vec& xs) { return w.dot(x) + k.dot(xs) + c; };
    bar.grad_x_h = [w](const Vec&, const Vec&) { return w; };
    bar.dh_dt = [k](const Vec&, const Vec&, const Vec& xs_dot) { return k.dot(xs_dot); };
    ControlAffineSystem sys(
        n, m, [f](const Vec&) { return f; }, [G](const Vec&) { return G; });
    Vec g = G.col(0);
    return {sys, bar, gen.vec(n, -2.0, 2.0), gen.vec(n, -2.0, 2.0), gen.vec(n, -2.0, 2.0), f, g, w, k, c};
}

/// Random errors with the sign pattern produced by extremization:
/// e_h* <= 0, e_grad_h* >= 0, e_dhdt* <= 0.
inline WorstCaseErrors signed_errors(Gen& gen, double scale = 1.0) {
    return {-scale * gen.uniform(0.0, 1.0), scale * gen.uniform(0.0, 1.0), -scale * gen.uniform(0.0, 1.0)};
}

inline EnvironmentEstimate estimate(const Vec& xs_hat, const Vec& xs_hat_dot) {
    return {xs_hat, xs_hat_dot};
}

}  // namespace ercbf::testing
