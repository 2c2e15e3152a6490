#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pwlab/mesh.hpp"
#include "pwlab/solve.hpp"
#include "test_support.hpp"

using namespace pwlab;
using pwlab::testing::kPi;

TEST_CASE("build_mesh basic geometry", "[mesh]") {
    auto m = build_interval_mesh(0.0, kPi, 1023);
    CHECK(m->dim() == 1);
    CHECK(m->spacing(0) == Catch::Approx(kPi / 1024.0).epsilon(1e-15));
    CHECK(m->node_count() == 1023);
    CHECK(m->quad_weight() == Catch::Approx(kPi / 1024.0));

    auto sq = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 63, 63);
    CHECK(sq->node_count() == 3969);
    CHECK(sq->spacing(0) == Catch::Approx(1.0 / 64.0));
    CHECK(sq->spacing(1) == Catch::Approx(1.0 / 64.0));

    // |Omega| = quad_weight * nodes up to the O(h) boundary-cell discrepancy.
    CHECK(std::abs(m->domain_measure() - m->quad_weight() * double(m->node_count())) <
          2.0 * m->spacing(0));
}

TEST_CASE("build_mesh rejects bad input", "[mesh]") {
    CHECK_THROWS_AS(build_mesh(3, {{0, 1}, {0, 1}, {0, 1}}, {4, 4, 4}), std::invalid_argument);
    CHECK_THROWS_AS(build_interval_mesh(0.0, 0.0, 100), std::invalid_argument);
    CHECK_THROWS_AS(build_interval_mesh(1.0, 0.0, 100), std::invalid_argument);
    CHECK_THROWS_AS(build_interval_mesh(0.0, 1.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(build_mesh(1, {{0, 1}}, {5, 5}), std::invalid_argument);
}

TEST_CASE("laplacian matches the sine eigenrelation", "[mesh]") {
    auto m = build_interval_mesh(0.0, kPi, 1023);
    auto u = GridFunction::sample(m, [](double x) { return std::sin(x); });
    auto lap = apply_laplacian(*m, u);
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) worst = std::max(worst, std::abs(lap[i] + u[i]));
    const double h = m->spacing(0);
    CHECK(worst < 2.0 * h * h);  // second-order accuracy

    auto zero = GridFunction::zero(m);
    CHECK(sup_norm(apply_laplacian(*m, zero)) == 0.0);
}

TEST_CASE("laplacian 2D eigenfunction", "[mesh]") {
    auto m = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 63, 63);
    auto u = GridFunction::sample(
        m, [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); });
    auto lap = apply_laplacian(*m, u);
    const double ev = 2.0 * kPi * kPi;
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        worst = std::max(worst, std::abs(lap[i] + ev * u[i]));
    const double h = m->spacing(0);
    CHECK(worst < 40.0 * h * h);
}

TEST_CASE("laplacian is linear", "[mesh]") {
    auto m = build_interval_mesh(0.0, 2.0, 101);
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        auto u = pwlab::testing::random_nodal_field(m, rng);
        auto v = pwlab::testing::random_nodal_field(m, rng);
        const double a = 1.7, b = -0.3;
        auto lhs = apply_laplacian(*m, axpy(a, u, scale(b, v)));
        auto rhs = axpy(a, apply_laplacian(*m, u), scale(b, apply_laplacian(*m, v)));
        double worst = 0.0, scale_ref = 0.0;
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
            scale_ref = std::max(scale_ref, std::abs(rhs[i]));
        }
        CHECK(worst <= 1e-12 * std::max(1.0, scale_ref));
    }
}

TEST_CASE("mesh mismatch rejected", "[mesh]") {
    auto m1 = build_interval_mesh(0.0, 1.0, 31);
    auto m2 = build_interval_mesh(0.0, 2.0, 31);
    auto u = GridFunction::zero(m1);
    auto v = GridFunction::zero(m2);
    CHECK_THROWS_AS(inner_l2(*m1, u, v), std::invalid_argument);
    CHECK_THROWS_AS(apply_laplacian(*m2, u), std::invalid_argument);
    CHECK_THROWS_AS(grad_norm_sq(*m2, u), std::invalid_argument);
}

TEST_CASE("inner_l2 trig oracles", "[mesh]") {
    auto m = build_interval_mesh(0.0, kPi, 1023);
    auto s1 = GridFunction::sample(m, [](double x) { return std::sin(x); });
    auto s2 = GridFunction::sample(m, [](double x) { return std::sin(2.0 * x); });
    CHECK(inner_l2(*m, s1, s1) == Catch::Approx(kPi / 2.0).margin(1e-4));
    CHECK(std::abs(inner_l2(*m, s1, s2)) < 1e-4);  // orthogonality
    CHECK(inner_l2(*m, s1, GridFunction::zero(m)) == 0.0);
}

TEST_CASE("integrate_power oracles and precondition", "[mesh]") {
    auto m = build_interval_mesh(0.0, kPi, 1023);
    auto s = GridFunction::sample(m, [](double x) { return std::sin(x); });
    CHECK(integrate_power(*m, s, 4.0) == Catch::Approx(3.0 * kPi / 8.0).margin(1e-3));
    CHECK(integrate_power(*m, s, 2.0) == Catch::Approx(kPi / 2.0).margin(1e-4));
    CHECK(integrate_power(*m, GridFunction::zero(m), 3.5) == 0.0);
    CHECK_THROWS_AS(integrate_power(*m, s, 0.5), std::invalid_argument);
}

TEST_CASE("grad_norm_sq oracles", "[mesh]") {
    auto m = build_interval_mesh(0.0, kPi, 1023);
    auto s = GridFunction::sample(m, [](double x) { return std::sin(x); });
    CHECK(grad_norm_sq(*m, s) == Catch::Approx(kPi / 2.0).margin(1e-3));
    CHECK(grad_norm_sq(*m, GridFunction::zero(m)) == 0.0);
}

TEST_CASE("summation by parts holds to round-off", "[mesh]") {
    std::mt19937_64 rng(7);
    for (auto mesh : {build_interval_mesh(0.0, kPi, 255), build_interval_mesh(-1.0, 2.0, 64)}) {
        for (int rep = 0; rep < 50; ++rep) {
            auto u = pwlab::testing::random_nodal_field(mesh, rng);
            const double lhs = grad_norm_sq(*mesh, u);
            const double rhs = inner_l2(*mesh, u, scale(-1.0, apply_laplacian(*mesh, u)));
            CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
        }
    }
    auto sq = build_rectangle_mesh(0.0, 1.0, 0.0, 2.0, 17, 23);
    for (int rep = 0; rep < 20; ++rep) {
        auto u = pwlab::testing::random_nodal_field(sq, rng);
        const double lhs = grad_norm_sq(*sq, u);
        const double rhs = inner_l2(*sq, u, scale(-1.0, apply_laplacian(*sq, u)));
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("discrete Poincare with the exact first eigenvalue", "[mesh]") {
    const int n = 255;
    auto m = build_interval_mesh(0.0, kPi, n);
    const double h = m->spacing(0);
    const double lambda1 = 4.0 / (h * h) * std::pow(std::sin(kPi * h / (2.0 * kPi)), 2);

    // The discrete sine mode attains the constant exactly.
    auto s = GridFunction::sample(m, [](double x) { return std::sin(x); });
    CHECK(grad_norm_sq(*m, s) ==
          Catch::Approx(lambda1 * inner_l2(*m, s, s)).epsilon(1e-12));

    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        auto u = pwlab::testing::random_nodal_field(m, rng);
        CHECK(grad_norm_sq(*m, u) >= lambda1 * inner_l2(*m, u, u) * (1.0 - 1e-12));
    }
}

TEST_CASE("quadrature converges at second order on sine integrands", "[mesh]") {
    // Halving h must reduce the error by at least ~3.5x.
    auto err_at = [](int n) {
        auto m = build_interval_mesh(0.0, kPi, n);
        auto s = GridFunction::sample(m, [](double x) { return std::sin(x); });
        return std::abs(integrate_power(*m, s, 4.0) - 3.0 * kPi / 8.0);
    };
    const double e1 = err_at(127);
    const double e2 = err_at(255);
    CHECK(e1 / e2 >= 3.5);

    auto gerr_at = [](int n) {
        auto m = build_interval_mesh(0.0, kPi, n);
        auto s = GridFunction::sample(m, [](double x) { return std::sin(x); });
        return std::abs(grad_norm_sq(*m, s) - kPi / 2.0);
    };
    CHECK(gerr_at(127) / gerr_at(255) >= 3.5);
}

TEST_CASE("shifted Poisson solve: 1D direct and CG paths agree", "[mesh]") {
    auto m = build_interval_mesh(0.0, kPi, 127);
    std::mt19937_64 rng(3);
    auto rhs = pwlab::testing::random_smooth_field(m, rng);
    auto x_direct = solve_shifted_poisson(*m, rhs, 1.0, 0.01);

    // Residual check against the operator.
    auto resid = axpy(-1.0, apply_shifted_operator(*m, x_direct, 1.0, 0.01), rhs);
    CHECK(l2_norm(resid) <= 1e-10 * l2_norm(rhs));

    // The 2D path (CG) on a quasi-1D problem must match the eigen-oracle.
    auto sq = build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 31, 31);
    auto b = GridFunction::sample(
        sq, [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); });
    auto x = solve_shifted_poisson(*sq, b, 2.0, 1.0);
    // (alpha - beta Lap) has eigenvalue alpha + beta*lambda_11 on b's mode.
    auto back = apply_shifted_operator(*sq, x, 2.0, 1.0);
    auto r2 = axpy(-1.0, back, b);
    CHECK(l2_norm(r2) <= 1e-10 * l2_norm(b));
}

TEST_CASE("first Dirichlet mode matches the closed form", "[mesh]") {
    auto m = build_interval_mesh(0.0, kPi, 255);
    auto mode = first_dirichlet_mode(m);
    const double h = m->spacing(0);
    const double lambda1 = 4.0 / (h * h) * std::pow(std::sin(h / 2.0), 2);
    CHECK(mode.lambda1 == Catch::Approx(lambda1).epsilon(1e-10));
    CHECK(sup_norm(mode.eigfn) == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(min_value(mode.eigfn) >= 0.0);
    // Shape matches sin(x) after sup-normalization.
    auto s = GridFunction::sample(m, [](double x) { return std::sin(x); });
    double worst = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        worst = std::max(worst, std::abs(mode.eigfn[i] - s[i]));
    CHECK(worst < 1e-8);
}

TEST_CASE("grid function finiteness checks", "[mesh]") {
    auto m = build_interval_mesh(0.0, 1.0, 15);
    std::vector<double> bad(m->node_count(), 1.0);
    bad[7] = std::numeric_limits<double>::quiet_NaN();
    GridFunction u(m, std::move(bad));
    CHECK_FALSE(all_finite(u));
    CHECK_THROWS_AS(require_finite(u, "test"), std::invalid_argument);
}
