#include <doctest.h>

#include "ercbf/acc.hpp"
#include "ercbf/core.hpp"
#include "support.hpp"

using namespace ercbf;
using ercbf::testing::Gen;
using ercbf::testing::scalar;

namespace {

BarrierSpec constant_barrier(double value, double nu) {
    BarrierSpec bar;
    bar.nu = nu;
    bar.h = [value](const Vec&, const Vec&) { return value; };
    bar.grad_x_h = [](const Vec& x, const Vec&) { return Vec(Vec::Zero(x.size())); };
    bar.dh_dt = [](const Vec&, const Vec&, const Vec&) { return 0.0; };
    return bar;
}

}  // namespace

TEST_CASE("system rejects mismatched shapes") {
    ControlAffineSystem sys(
        2, 1, [](const Vec&) { return Vec(Vec::Zero(3)); }, [](const Vec&) { return Mat(Mat::Zero(2, 1)); });
    CHECK_THROWS_AS(sys.drift(Vec::Zero(2)), ShapeError);
    CHECK_THROWS_AS(sys.drift(Vec::Zero(1)), ShapeError);
    CHECK_THROWS_AS(sys.velocity(Vec::Zero(2), Vec::Zero(2)), ShapeError);
    CHECK_THROWS_AS(ControlAffineSystem(0, 1, nullptr, nullptr), ShapeError);
    CHECK_THROWS_AS(ControlAffineSystem(kMaxDim + 1, 1, nullptr, nullptr), ShapeError);
}

TEST_CASE("constant barrier leaves only alpha(h)") {
    const auto sys = acc::acc_system(acc::VehicleParams{});
    const BarrierSpec bar = constant_barrier(1.0, 5.0);
    Gen gen(3);
    for (int i = 0; i < 10; ++i) {
        const double phi =
            phi_nominal(sys, bar, gen.vec(2, -5, 5), gen.vec(2, -5, 5), gen.vec(2, -5, 5), scalar(gen.uniform(-1e3, 1e3)));
        CHECK(phi == doctest::Approx(5.0).epsilon(1e-15));
    }
}

TEST_CASE("ACC barrier condition at the initial state, evaluated term by term") {
    const acc::VehicleParams p;
    const auto sys = acc::acc_system(p);
    const BarrierSpec bar = acc::acc_barrier(p, 5.0);
    Vec x(2), xs(2), xs_dot(2);
    x << 0.0, 27.8;
    xs << 80.0, 27.8;
    xs_dot << 27.8, 0.0;

    // Hand evaluation: grad h = [-1, -T_h], f = [v, -F_r/m], dh/dt = v_s.
    const double F_r = 0.1 + 5.0 * 27.8 + 0.25 * 27.8 * 27.8;
    const double h = 80.0 - 1.8 * 27.8;
    const double lf_h = -27.8 + 1.8 * F_r / 1650.0;
    const double expected = 27.8 + lf_h + 5.0 * h;
    CHECK(expected == doctest::Approx(150.16252).epsilon(1e-12));
    CHECK(phi_nominal(sys, bar, x, xs, xs_dot, scalar(0.0)) == doctest::Approx(expected).epsilon(1e-13));

    const BarrierTerms t = barrier_terms(sys, bar, x, xs, xs_dot);
    CHECK(t.h == doctest::Approx(29.96).epsilon(1e-14));
    CHECK(t.lg_h(0) == doctest::Approx(-1.8 / 1650.0).epsilon(1e-14));
}

TEST_CASE("phi_nominal is affine in u") {
    Gen gen(11);
    for (int i = 0; i < 200; ++i) {
        auto inst = testing::affine_instance(gen, 2);
        const Vec u1 = gen.vec(2, -10, 10);
        const Vec u2 = gen.vec(2, -10, 10);
        const double lam = gen.uniform(0, 1);
        auto phi = [&](const Vec& u) { return phi_nominal(inst.sys, inst.bar, inst.x, inst.xs, inst.xs_dot, u); };
        CHECK(phi(Vec(lam * u1 + (1 - lam) * u2)) ==
              doctest::Approx(lam * phi(u1) + (1 - lam) * phi(u2)).epsilon(1e-12));
        CHECK(phi(Vec(u1 + u2)) - phi(Vec::Zero(2)) ==
              doctest::Approx((phi(u1) - phi(Vec::Zero(2))) + (phi(u2) - phi(Vec::Zero(2)))).epsilon(1e-11));
    }
}

TEST_CASE("phi_robust with zero errors equals phi_nominal at the estimate") {
    Gen gen(12);
    for (int i = 0; i < 100; ++i) {
        auto inst = testing::affine_instance(gen);
        const EnvironmentEstimate est{inst.xs, inst.xs_dot};
        const Vec u = gen.vec(1, -5, 5);
        CHECK(phi_robust(inst.sys, inst.bar, inst.x, est, {}, u) ==
              phi_nominal(inst.sys, inst.bar, inst.x, inst.xs, inst.xs_dot, u));
    }
}

TEST_CASE("gradient error scales the velocity norm") {
    // f + g u = (0, 2) at u = 2 gives a norm of 2.
    ControlAffineSystem sys(
        2, 1, [](const Vec&) { return Vec(Vec::Zero(2)); },
        [](const Vec&) {
            Mat g(2, 1);
            g << 0.0, 1.0;
            return g;
        });
    const BarrierSpec bar = constant_barrier(3.0, 1.0);
    const EnvironmentEstimate est{Vec::Zero(2), Vec::Zero(2)};
    const Vec u = scalar(2.0);
    const double nominal = phi_nominal(sys, bar, Vec::Zero(2), est.xs_hat, est.xs_hat_dot, u);
    CHECK(phi_robust(sys, bar, Vec::Zero(2), est, {0.0, 1.0, 0.0}, u) == doctest::Approx(nominal - 2.0));
}

TEST_CASE("phi_robust never exceeds phi_nominal for signed errors") {
    Gen gen(13);
    for (int i = 0; i < 1000; ++i) {
        auto inst = testing::affine_instance(gen);
        const EnvironmentEstimate est{inst.xs, inst.xs_dot};
        const auto wce = testing::signed_errors(gen, 3.0);
        const Vec u = gen.vec(1, -5, 5);
        CHECK(phi_robust(inst.sys, inst.bar, inst.x, est, wce, u) <=
              phi_nominal(inst.sys, inst.bar, inst.x, inst.xs, inst.xs_dot, u));
    }
}

TEST_CASE("phi_robust is concave in u") {
    Gen gen(14);
    for (int i = 0; i < 500; ++i) {
        auto inst = testing::affine_instance(gen);
        const EnvironmentEstimate est{inst.xs, inst.xs_dot};
        const auto wce = testing::signed_errors(gen, 2.0);
        const double u1 = gen.uniform(-10, 10);
        const double u2 = gen.uniform(-10, 10);
        const double lam = gen.uniform(0, 1);
        auto phi = [&](double u) { return phi_robust(inst.sys, inst.bar, inst.x, est, wce, scalar(u)); };
        CHECK(phi(lam * u1 + (1 - lam) * u2) >= lam * phi(u1) + (1 - lam) * phi(u2) - 1e-10);
    }
}

TEST_CASE("inner product with a bounded error is bounded by the norm") {
    Gen gen(15);
    for (int i = 0; i < 10000; ++i) {
        const int n = gen.integer(1, 6);
        const double E = gen.uniform(0, 3);
        Vec e = gen.vec(n, -1, 1);
        if (e.norm() > 0) {
            e *= gen.uniform(0, E) / e.norm();
        }
        const Vec v = gen.vec(n, -10, 10);
        CHECK(e.dot(v) >= -E * v.norm() - 1e-12);
    }
}

TEST_CASE("non-finite inputs are rejected") {
    const auto sys = acc::acc_system(acc::VehicleParams{});
    const BarrierSpec bar = acc::acc_barrier(acc::VehicleParams{}, 5.0);
    Vec x(2);
    x << 0.0, std::nan("");
    CHECK_THROWS_AS(phi_nominal(sys, bar, x, Vec::Zero(2), Vec::Zero(2), scalar(0.0)), std::domain_error);
}
