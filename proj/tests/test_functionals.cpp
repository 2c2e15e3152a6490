#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pwlab/functionals.hpp"
#include "pwlab/io.hpp"
#include "pwlab/nehari.hpp"
#include "test_support.hpp"

using namespace pwlab;
using pwlab::testing::kPi;

namespace {
MeshPtr unit_mesh() { return build_interval_mesh(0.0, kPi, 1023); }
GridFunction sine(const MeshPtr& m, double c = 1.0) {
    return GridFunction::sample(m, [c](double x) { return c * std::sin(x); });
}
}  // namespace

TEST_CASE("Params validation", "[functionals]") {
    CHECK_THROWS_AS(Params{1.0, 0.0, 0.0}.validate(), std::invalid_argument);
    CHECK_THROWS_AS(Params{3.0, -0.5, 0.0}.validate(), std::invalid_argument);
    CHECK_THROWS_AS(Params{3.0, 0.0, -1.0}.validate(), std::invalid_argument);
    CHECK_NOTHROW(Params{2.5, 1.0, 0.5}.validate());
}

TEST_CASE("energy oracles on c sin x", "[functionals]") {
    auto m = unit_mesh();
    Params p{3.0, 0.0, 0.0};
    // c = 1: J = pi/4 - (1/4)(3pi/8) = 5pi/32.
    CHECK(energy_J(sine(m), p) == Catch::Approx(5.0 * kPi / 32.0).margin(1e-3));
    CHECK(energy_J(GridFunction::zero(m), p) == 0.0);
    // c = 2: 4 (pi/4) - (1/4) 16 (3pi/8) = -pi/2.
    CHECK(energy_J(sine(m, 2.0), p) == Catch::Approx(-kPi / 2.0).margin(1e-2));
}

TEST_CASE("mass oracles", "[functionals]") {
    auto m = unit_mesh();
    CHECK(mass_M(sine(m)) == Catch::Approx(kPi / 4.0).margin(1e-4));
    CHECK(mass_M(GridFunction::zero(m)) == 0.0);
    CHECK(mass_M(sine(m, 3.0)) == Catch::Approx(9.0 * kPi / 4.0).margin(1e-3));
}

TEST_CASE("Nehari value oracles", "[functionals]") {
    auto m = unit_mesh();
    Params p{3.0, 0.0, 0.0};
    CHECK(nehari_I(sine(m), p) == Catch::Approx(kPi / 8.0).margin(1e-3));
    CHECK(nehari_I(GridFunction::zero(m), p) == 0.0);
    // c = 10: 100 pi/2 - 10^4 (3pi/8) < 0; the sign is the tested fact.
    CHECK(nehari_I(sine(m, 10.0), p) < 0.0);
    CHECK(nehari_I(sine(m, 10.0), p) == Catch::Approx(50.0 * kPi - 3750.0 * kPi).epsilon(1e-3));
}

TEST_CASE("E_lambda composition", "[functionals]") {
    auto m = unit_mesh();
    auto u = sine(m);
    CHECK(energy_E_lambda(u, Params{3.0, 0.0, 0.0}) == energy_J(u, Params{3.0, 0.0, 0.0}));
    CHECK(energy_E_lambda(u, Params{3.0, 1.0, 0.0}) ==
          Catch::Approx(13.0 * kPi / 32.0).margin(1e-3));
    CHECK(energy_E_lambda(GridFunction::zero(m), Params{3.0, 2.0, 0.0}) == 0.0);
}

TEST_CASE("delta functionals and the cross identity", "[functionals]") {
    auto m = unit_mesh();
    auto u = sine(m);
    Params p0{3.0, 0.0, 0.0};
    auto d0 = delta_functionals(u, p0);
    CHECK(d0.J_delta == energy_J(u, p0));
    CHECK(d0.I_delta == nehari_I(u, p0));

    Params p2{3.0, 0.0, 2.0};
    auto d2 = delta_functionals(u, p2);
    CHECK(d2.J_delta == Catch::Approx(5.0 * kPi / 32.0 + 2.0 * kPi / 4.0).margin(2e-3));
    CHECK(d2.I_delta == Catch::Approx(kPi / 8.0 + 4.0 * kPi / 4.0).margin(2e-3));

    // I_delta = 2 J_delta - (1 - 2/(p+1)) int |u|^{p+1} to 1e-12 relative.
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        auto w = pwlab::testing::random_smooth_field(m, rng);
        Params pr{2.0 + (rep % 5) * 0.7, 0.0, 0.1 * (rep % 4)};
        auto df = delta_functionals(w, pr);
        const double lp1 = integrate_power(w, pr.p + 1.0);
        const double rhs = 2.0 * df.J_delta - (1.0 - 2.0 / (pr.p + 1.0)) * lp1;
        CHECK(std::abs(df.I_delta - rhs) <=
              1e-12 * std::max({std::abs(df.I_delta), std::abs(rhs), 1e-30}));
    }
}

TEST_CASE("quotient_A value, scale invariance and delta monotonicity", "[functionals]") {
    auto m = unit_mesh();
    auto u = sine(m);
    Params p{3.0, 0.0, 0.0};
    CHECK(quotient_A(u, p) ==
          Catch::Approx((kPi / 2.0) / std::sqrt(3.0 * kPi / 8.0)).margin(1e-3));
    CHECK_THROWS_AS(quotient_A(GridFunction::zero(m), p), std::invalid_argument);

    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 30; ++rep) {
        auto w = pwlab::testing::random_smooth_field(m, rng);
        if (is_zero(w)) continue;
        const double c = (rep % 2 == 0) ? 2.5 : -0.03;
        const double q1 = quotient_A(w, p);
        const double q2 = quotient_A(scale(c, w), p);
        CHECK(std::abs(q1 - q2) <= 1e-10 * q1);
        CHECK(quotient_A(w, Params{3.0, 0.0, 1.0}) > q1);
    }
}

TEST_CASE("report fields are consistent", "[functionals]") {
    auto m = unit_mesh();
    Params p{3.0, 1.0, 0.0};
    auto u = sine(m);
    auto r = report(u, p);
    CHECK(r.J == energy_J(u, p));
    CHECK(r.M == mass_M(u));
    CHECK(r.I == nehari_I(u, p));
    CHECK(r.E_lambda == r.J + p.lambda * r.M);
    CHECK(r.sup_norm == sup_norm(u));

    auto z = report(GridFunction::zero(m), p);
    CHECK(z.J == 0.0);
    CHECK(z.M == 0.0);
    CHECK(z.I == 0.0);
    CHECK(z.E_lambda == 0.0);
    CHECK(z.sup_norm == 0.0);
}

TEST_CASE("homogeneity ladder under u -> c u", "[functionals]") {
    auto m = build_interval_mesh(0.0, 2.0, 255);
    std::mt19937_64 rng(23);
    Params p{3.0, 0.0, 0.0};
    for (int rep = 0; rep < 100; ++rep) {
        auto u = pwlab::testing::random_smooth_field(m, rng);
        if (is_zero(u)) continue;
        std::uniform_real_distribution<double> cd(0.1, 3.0);
        const double c = cd(rng) * ((rep % 2) ? 1.0 : -1.0);
        auto cu = scale(c, u);
        const double G = grad_norm_sq(u);
        const double P = integrate_power(u, p.p + 1.0);
        CHECK(mass_M(cu) == Catch::Approx(c * c * mass_M(u)).epsilon(1e-12));
        CHECK(grad_norm_sq(cu) == Catch::Approx(c * c * G).epsilon(1e-12));
        CHECK(integrate_power(cu, p.p + 1.0) ==
              Catch::Approx(std::pow(std::abs(c), p.p + 1.0) * P).epsilon(1e-12));
        CHECK(nehari_I(cu, p) ==
              Catch::Approx(c * c * G - std::pow(std::abs(c), p.p + 1.0) * P).epsilon(1e-10));
    }
}

TEST_CASE("I(t u) has exactly one sign change along each ray", "[functionals]") {
    auto m = build_interval_mesh(0.0, kPi, 255);
    std::mt19937_64 rng(31);
    Params p{3.0, 0.0, 0.0};
    for (int rep = 0; rep < 25; ++rep) {
        auto u = pwlab::testing::random_smooth_field(m, rng);
        if (is_zero(u)) continue;
        const double t_star = nehari_scale(u, p).t_star;
        for (double f : {0.1, 0.5, 0.9}) CHECK(nehari_I(scale(f * t_star, u), p) > 0.0);
        for (double f : {1.1, 2.0, 10.0}) CHECK(nehari_I(scale(f * t_star, u), p) < 0.0);
    }
}

TEST_CASE("functional report CSV row round-trips", "[functionals]") {
    auto m = unit_mesh();
    auto r = report(sine(m, 0.37), Params{3.0, 1.0, 0.5});
    const std::string row = functional_report_row(r);
    // 9 comma-separated fields in the documented order.
    CHECK(std::count(row.begin(), row.end(), ',') == 8);
    const auto fields = pwlab::detail::split_csv_line(row);
    CHECK(pwlab::detail::parse_double(fields[0], "row") == r.J);
    CHECK(pwlab::detail::parse_double(fields[3], "row") == r.E_lambda);
    CHECK(pwlab::detail::parse_double(fields[8], "row") == r.lp1_norm_pow);
}
