#include <doctest.h>

#include <cmath>
#include <limits>

#include "ercbf/optim.hpp"
#include "support.hpp"

using namespace ercbf;
using namespace ercbf::optim;
using ercbf::testing::Gen;

namespace {

Mat mat1(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

Vec vec1(double v) { return testing::scalar(v); }

struct RandomQp {
    Mat H;
    Vec c;
    Mat A;
    Vec b;
};

RandomQp random_feasible_qp(Gen& gen, int d, int k) {
    Mat M(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            M(i, j) = gen.uniform(-1, 1);
        }
    }
    RandomQp qp;
    qp.H = M * M.transpose() + 0.5 * Mat::Identity(d, d);
    qp.c = gen.vec(d, -3, 3);
    qp.A = Mat(k, d);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < d; ++j) {
            qp.A(i, j) = gen.uniform(-1, 1);
        }
    }
    const Vec z0 = gen.vec(d, -1, 1);
    qp.b = qp.A * z0 - gen.vec(k, 0, 0.5);
    return qp;
}

double objective(const RandomQp& qp, const Vec& z) {
    return 0.5 * z.dot(qp.H * z) + qp.c.dot(z);
}

// Exact oracle: try every active subset, keep KKT points.
Vec kkt_enumeration(const RandomQp& qp) {
    const int d = static_cast<int>(qp.c.size());
    const int k = static_cast<int>(qp.b.size());
    Vec best;
    double best_val = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << k); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < k; ++i) {
            if (mask & (1 << i)) {
                act.push_back(i);
            }
        }
        const int q = static_cast<int>(act.size());
        if (q > d) {
            continue;
        }
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d + q, d + q);
        Eigen::VectorXd rhs(d + q);
        K.topLeftCorner(d, d) = qp.H;
        rhs.head(d) = -qp.c;
        for (int j = 0; j < q; ++j) {
            K.block(0, d + j, d, 1) = -qp.A.row(act[j]).transpose();
            K.block(d + j, 0, 1, d) = qp.A.row(act[j]);
            rhs(d + j) = qp.b(act[j]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
        if (lu.rank() < d + q) {
            continue;
        }
        const Eigen::VectorXd sol = lu.solve(rhs);
        const Vec z = sol.head(d);
        if ((sol.tail(q).array() < -1e-10).any() || ((qp.A * z - qp.b).array() < -1e-10).any()) {
            continue;
        }
        if (objective(qp, z) < best_val) {
            best_val = objective(qp, z);
            best = z;
        }
    }
    return best;
}

Vec grid_minimizer_2d(const RandomQp& qp) {
    auto feasible = [&](double x, double y) {
        Vec z(2);
        z << x, y;
        return ((qp.A * z - qp.b).array() >= 0.0).all();
    };
    auto search = [&](double cx, double cy, double half, double step) {
        Vec best(2);
        double best_val = std::numeric_limits<double>::infinity();
        const int n = static_cast<int>(std::lround(2 * half / step));
        for (int i = 0; i <= n; ++i) {
            for (int j = 0; j <= n; ++j) {
                const double x = cx - half + i * step;
                const double y = cy - half + j * step;
                if (!feasible(x, y)) {
                    continue;
                }
                Vec z(2);
                z << x, y;
                if (objective(qp, z) < best_val) {
                    best_val = objective(qp, z);
                    best = z;
                }
            }
        }
        return best;
    };
    Vec best = search(0.0, 0.0, 5.0, 1e-2);
    for (int pass = 0; pass < 4; ++pass) {
        best = search(best(0), best(1), 0.2, 1e-3);
    }
    return search(best(0), best(1), 0.02, 1e-4);
}

}  // namespace

TEST_CASE("QP with an inactive constraint returns the unconstrained optimum") {
    const QpResult r = solve_qp(DenseQP(mat1(1.0), vec1(0.0), mat1(1.0), vec1(-1.0)));
    REQUIRE(r.optimal());
    CHECK(r.z(0) == 0.0);
    CHECK(r.active_set.empty());
}

TEST_CASE("QP projects onto a half-line") {
    const QpResult r = solve_qp(DenseQP(mat1(1.0), vec1(0.0), mat1(1.0), vec1(2.0)));
    REQUIRE(r.optimal());
    CHECK(r.z(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r.active_set == std::vector<int>{0});
    CHECK(r.multipliers(0) == doctest::Approx(2.0));
}

TEST_CASE("QP reports conflicting half-lines as infeasible") {
    Mat A(2, 1);
    A << 1.0, -1.0;
    Vec b(2);
    b << 2.0, -1.0;  // u >= 2 and u <= 1
    CHECK(solve_qp(DenseQP(mat1(1.0), vec1(0.0), A, b)).status == QpStatus::kInfeasible);
}

TEST_CASE("QP rejects bad data") {
    Mat H(2, 2);
    H << 1.0, 0.5, 0.0, 1.0;
    CHECK_THROWS_AS(DenseQP(H, Vec::Zero(2), Mat(0, 2), Vec(0)), std::invalid_argument);
    CHECK_THROWS_AS(DenseQP(-mat1(1.0), vec1(0.0), Mat(0, 1), Vec(0)), std::invalid_argument);
    CHECK_THROWS_AS(DenseQP(Mat::Identity(5, 5), Vec::Zero(5), Mat(0, 5), Vec(0)), ShapeError);
    CHECK_THROWS_AS(DenseQP(mat1(1.0), vec1(std::nan("")), Mat(0, 1), Vec(0)), std::invalid_argument);
}

TEST_CASE("QP ties enter the lowest index first") {
    // Two identical constraints: only the first joins the working set.
    Mat A(2, 1);
    A << 1.0, 1.0;
    Vec b(2);
    b << 1.0, 1.0;
    const QpResult r = solve_qp(DenseQP(mat1(1.0), vec1(0.0), A, b));
    REQUIRE(r.optimal());
    CHECK(r.active_set == std::vector<int>{0});
}

TEST_CASE("QP matches KKT enumeration on random instances") {
    Gen gen(21);
    for (int i = 0; i < 300; ++i) {
        const int d = gen.integer(1, kMaxQpVars);
        const int k = gen.integer(0, kMaxQpConstraints);
        const RandomQp qp = random_feasible_qp(gen, d, k);
        const QpResult r = solve_qp(DenseQP(qp.H, qp.c, qp.A, qp.b));
        REQUIRE(r.optimal());
        const Vec ref = kkt_enumeration(qp);
        REQUIRE(ref.size() == d);
        CHECK((r.z - ref).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(((qp.A * r.z - qp.b).array() >= -1e-9).all());
        // Stationarity with the reported multipliers.
        CHECK((qp.H * r.z + qp.c - qp.A.transpose() * r.multipliers).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("QP matches grid search on two-variable four-constraint instances") {
    Gen gen(22);
    for (int i = 0; i < 20; ++i) {
        const RandomQp qp = random_feasible_qp(gen, 2, 4);
        const QpResult r = solve_qp(DenseQP(qp.H, qp.c, qp.A, qp.b));
        REQUIRE(r.optimal());
        // Flat valleys make the grid argmin loose; the optimal value is not.
        const double grid_val = objective(qp, grid_minimizer_2d(qp));
        const double val = objective(qp, r.z);
        CHECK(val <= grid_val + 1e-9);
        CHECK(grid_val - val < 1e-3 * (1.0 + std::abs(val)));
    }
}

TEST_CASE("QP with only inactive constraints returns -H^-1 c") {
    Gen gen(23);
    for (int i = 0; i < 100; ++i) {
        const int d = gen.integer(1, 4);
        RandomQp qp = random_feasible_qp(gen, d, 3);
        const Vec z_free = -qp.H.llt().solve(qp.c);
        qp.b = qp.A * z_free - gen.vec(3, 0.1, 1.0);
        const QpResult r = solve_qp(DenseQP(qp.H, qp.c, qp.A, qp.b));
        REQUIRE(r.optimal());
        CHECK((r.z - z_free).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(r.active_set.empty());
    }
}

TEST_CASE("cone without the norm term is a half-line") {
    const Interval iv = feasible_interval(ScalarConeConstraint(-3.0, 2.0, 0.0, Vec::Zero(2), Vec::Zero(2)));
    CHECK(iv.lo == doctest::Approx(1.5));
    CHECK_FALSE(iv.bounded_above());
}

TEST_CASE("unit cone gives the unit interval") {
    Vec v0 = Vec::Zero(2);
    Vec v1(2);
    v1 << 1.0, 0.0;
    const Interval iv = feasible_interval(ScalarConeConstraint(1.0, 0.0, 1.0, v0, v1));
    REQUIRE_FALSE(iv.empty);
    CHECK(iv.lo == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(iv.hi == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cone with an empty feasible set") {
    Vec v0(2);
    v0 << 1.0, 0.0;
    Vec v1(2);
    v1 << 0.0, 1.0;
    CHECK(feasible_interval(ScalarConeConstraint(0.5, 0.0, 1.0, v0, v1)).empty);
}

TEST_CASE("projection onto an interval") {
    const Interval iv{-1.0, 1.0, false};
    CHECK(*project_to_interval(0.5, iv) == 0.5);
    CHECK(*project_to_interval(3.0, iv) == 1.0);
    CHECK_FALSE(project_to_interval(3.0, Interval::none()).has_value());
}

TEST_CASE("feasible interval agrees with pointwise evaluation") {
    Gen gen(24);
    int nonempty = 0;
    for (int i = 0; i < 300; ++i) {
        const int n = gen.integer(1, 3);
        const ScalarConeConstraint cone(gen.uniform(-5, 10), gen.uniform(-5, 5), gen.uniform(0, 2),
                                        gen.vec(n, -3, 3), gen.vec(n, -2, 2));
        const Interval iv = feasible_interval(cone);
        double lo = -50.0;
        double hi = 50.0;
        if (!iv.empty) {
            ++nonempty;
            CHECK(iv.lo <= iv.hi);
            if (iv.bounded_below()) {
                CHECK(cone.residual(iv.lo) >= -1e-9);
                lo = iv.lo - 1.0;
            }
            if (iv.bounded_above()) {
                CHECK(cone.residual(iv.hi) >= -1e-9);
                hi = iv.hi + 1.0;
            }
        }
        for (int j = 0; j <= 10000; ++j) {
            const double u = lo + (hi - lo) * j / 10000.0;
            const double r = cone.residual(u);
            if (std::abs(r) < 1e-7) {
                continue;
            }
            CHECK((r > 0.0) == iv.contains(u));
        }
    }
    CHECK(nonempty > 100);
}

TEST_CASE("projection matches a refined grid search") {
    Gen gen(25);
    for (int i = 0; i < 500; ++i) {
        const ScalarConeConstraint cone(gen.uniform(-2, 10), gen.uniform(-5, 5), gen.uniform(0, 2),
                                        gen.vec(2, -3, 3), gen.vec(2, -2, 2));
        const double u_des = gen.uniform(-20, 20);
        const auto proj = project_to_interval(u_des, feasible_interval(cone));

        auto search = [&](double center, double half, double step) {
            std::optional<double> best;
            const int n = static_cast<int>(std::lround(2 * half / step));
            for (int j = 0; j <= n; ++j) {
                const double u = center - half + j * step;
                if (cone.residual(u) >= 0.0 && (!best || std::abs(u - u_des) < std::abs(*best - u_des))) {
                    best = u;
                }
            }
            return best;
        };
        const auto coarse = search(u_des, 50.0, 1e-3);
        if (!coarse) {
            CHECK_FALSE(proj.has_value());
            continue;
        }
        REQUIRE(proj.has_value());
        const auto fine = search(*coarse, 1e-3, 1e-7);
        REQUIRE(fine.has_value());
        CHECK(std::abs(*proj - *fine) < 1e-6);
    }
}

TEST_CASE("rotated cone form keeps the projection optimizer") {
    Gen gen(26);
    for (int i = 0; i < 200; ++i) {
        const ScalarConeConstraint cone(gen.uniform(1, 10), gen.uniform(-5, 5), gen.uniform(0, 2),
                                        gen.vec(2, -3, 3), gen.vec(2, -2, 2));
        const double u_des = gen.uniform(-20, 20);
        const Interval iv = feasible_interval(cone);
        if (iv.empty) {
            continue;
        }
        const double u_star = *project_to_interval(u_des, iv);
        const RotatedConeProgram rc = to_rotated_cone(cone, u_des);
        const double q_star = RotatedConeProgram::tight_q(u_star);
        CHECK(rc.feasible(u_star, q_star, 1e-9));
        CHECK(rc.rotated_cone_slack(u_star, q_star) == doctest::Approx(0.0).scale(1.0 + q_star));
        CHECK_FALSE(rc.feasible(u_star, q_star - 1e-3 * (1.0 + q_star)));
        const double best = rc.objective(u_star, q_star);
        for (int j = 0; j < 200; ++j) {
            const double lo = iv.bounded_below() ? iv.lo : u_star - 30.0;
            const double hi = iv.bounded_above() ? iv.hi : u_star + 30.0;
            const double u = gen.uniform(lo, hi);
            const double q = RotatedConeProgram::tight_q(u) + gen.uniform(0, 1);
            if (rc.feasible(u, q)) {
                CHECK(rc.objective(u, q) >= best - 1e-9 * (1.0 + std::abs(best)));
            }
        }
    }
}
