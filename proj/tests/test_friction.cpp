#include "bobsled/common.hpp"
#include "bobsled/friction.hpp"
#include "bobsled/kvtext.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <random>

using namespace bobsled;
using namespace bobsled::friction;

TEST_SUITE("friction") {

TEST_CASE("longitudinal coefficient against the quadratic") {
    const LongitudinalFrictionParams p;
    auto q = [](double x) { return 1e-3 * (0.088 * x * x - 2.01 * x + 14.66); };
    CHECK(mu_x(7.7, p) == doctest::Approx(q(7.7)).epsilon(1e-14));
    CHECK(mu_x(7.7, p) == doctest::Approx(4.40e-3).epsilon(0.005));
    const double vertex = 2.01 / (2 * 0.088);
    CHECK(vertex == doctest::Approx(11.42).epsilon(1e-3));
    CHECK(mu_x(vertex, p) == doctest::Approx(3.18e-3).epsilon(0.005));
    CHECK(mu_x(vertex, p) <= mu_x(vertex - 0.1, p));
    CHECK(mu_x(vertex, p) <= mu_x(vertex + 0.1, p));
    CHECK(q(30.0) > 0.007);
    CHECK(mu_x(30.0, p) == 0.007);
    CHECK_THROWS_AS(mu_x(0.0, p), std::invalid_argument);
}

TEST_CASE("longitudinal coefficient stays in [0, E_x]") {
    LongitudinalFrictionParams p;
    p.D_x = 5.0;  // quadratic dips below zero near the vertex
    for (double x = 0.1; x < 60.0; x += 0.1) {
        CHECK(mu_x(x, p) >= 0.0);
        CHECK(mu_x(x, p) <= p.E_x);
    }
}

TEST_CASE("longitudinal force") {
    CHECK(force_x_fixed(2000.0, 0.0, 0.004) == doctest::Approx(-8.0));
    CHECK(force_x_fixed(2000.0, std::numbers::pi / 2, 0.004) == doctest::Approx(0.0).scale(1.0));
    CHECK(force_x_fixed(0.0, 0.1, 0.004) == 0.0);
    const LongitudinalFrictionParams p;
    CHECK(force_x(3000.0, 0.05, 10.0, p) == force_x(3000.0, -0.05, 10.0, p));
    CHECK(force_x(3000.0, 0.05, 10.0, p) <= 0.0);
}

TEST_CASE("lateral law matches the formula and its small-angle slope") {
    for (const auto& prm : {LateralFrictionParams::front_reference(), LateralFrictionParams::rear_reference()}) {
        for (double fz : {2000.0, 5000.0, 10000.0}) {
            for (double a : {-0.05, -0.01, 0.0, 0.003, 0.04}) {
                CHECK(force_y(fz, a, prm) ==
                      doctest::Approx(oracle::magic_formula(fz, a, prm.mu_zeta_y, prm.C_y, prm.E_y, prm.K_y)).epsilon(1e-13));
            }
            const double slope = oracle::central_difference([&](double a) { return force_y(fz, a, prm); }, 0.0, 1e-6);
            CHECK(slope == doctest::Approx(prm.K_y).epsilon(1e-4));
        }
    }
    CHECK(force_y(5000.0, 0.0, LateralFrictionParams::front_reference()) == 0.0);
    CHECK_THROWS_AS(force_y(0.0, 0.01, LateralFrictionParams::front_reference()), std::invalid_argument);
}

TEST_CASE("lateral law: odd, monotone to 20 degrees, brute-force tabulation") {
    const auto prm = LateralFrictionParams::front_reference();
    for (double fz : {1000.0, 4000.0, 15000.0}) {
        double prev = 0.0;
        for (int k = 0; k <= 2000; ++k) {
            const double a = oracle::rad(20.0 * k / 2000.0);
            const double f = force_y(fz, a, prm);
            CHECK(force_y(fz, -a, prm) == doctest::Approx(-f).epsilon(1e-12));
            CHECK(f >= prev);
            CHECK(f == doctest::Approx(oracle::magic_formula(fz, a, prm.mu_zeta_y, prm.C_y, prm.E_y, prm.K_y)).epsilon(1e-12));
            prev = f;
        }
        // F_y / F_z depends on F_z only through B_y: equal B_y * alpha gives equal ratios
        const double b1 = prm.K_y / (prm.C_y * prm.mu_zeta_y * fz), b2 = prm.K_y / (prm.C_y * prm.mu_zeta_y * 2 * fz);
        const double a = 0.01;
        CHECK(force_y(fz, a, prm) / fz == doctest::Approx(force_y(2 * fz, a * b1 / b2, prm) / (2 * fz)).epsilon(1e-12));
    }
}

TEST_CASE("Braghin reference") {
    CHECK(force_y_braghin(1000.0, 0.0) == 0.0);
    CHECK(force_y_braghin(1000.0, 0.02) == doctest::Approx(250.0).epsilon(1e-14));
    CHECK(force_y_braghin(1000.0, 1e6) == doctest::Approx(500.0).epsilon(1e-6));
    for (double a : {-1.0, -0.1, 0.01, 0.5, 1.5}) {
        CHECK(std::abs(force_y_braghin(800.0, a)) < 400.0);
        CHECK(force_y_braghin(800.0, a) == doctest::Approx(oracle::braghin(800.0, a)).epsilon(1e-14));
    }
}

TEST_CASE("track radius") {
    CHECK(*track_radius_y(30.0, -0.6) == doctest::Approx(50.0));
    CHECK(*track_radius_y(30.0, 0.6) == doctest::Approx(-50.0));
    CHECK_FALSE(track_radius_y(30.0, 0.0).has_value());
    CHECK_FALSE(track_radius_y(30.0, 5e-4).has_value());
}

TEST_CASE("pressure lookup") {
    const auto table = PressureLookup::parse("r,1000,2000,4000\n10,8,10,14\n50,6,8,12\n");
    CHECK(lookup_pressure(table, 2000.0, 10.0) == 10.0);
    CHECK(lookup_pressure(table, 4000.0, 50.0) == 12.0);
    // bilinear-consistent cell: centre is the mean of the corners
    CHECK(lookup_pressure(table, 1500.0, 30.0) == doctest::Approx((8 + 10 + 6 + 8) / 4.0).epsilon(1e-14));
    CHECK(lookup_pressure(table, 9000.0, 10.0) == 14.0);
    CHECK(lookup_pressure(table, 500.0, 5.0) == 8.0);
    CHECK(lookup_pressure(table, 2000.0, std::nullopt) == 8.0);  // flat -> largest radius row
    CHECK_THROWS_AS(PressureLookup::parse("r,1000,900\n10,8,9\n"), DataError);
    CHECK_THROWS_AS(PressureLookup::parse("r,1000,2000\n10,8,-1\n"), DataError);
    CHECK_THROWS_AS(PressureLookup::parse("r,1000,2000\n10,8\n"), DataError);
}

TEST_CASE("longitudinal model selects fixed or pressure-based coefficient") {
    LongitudinalModel fixed;
    CHECK(fixed.mu(3000.0, std::nullopt) == kDefaultMuX);
    CHECK(fixed.force(2000.0, 0.0, std::nullopt) == doctest::Approx(-8.0));
    LongitudinalModel lookup;
    lookup.params = LongitudinalFrictionParams{};
    lookup.pressure = PressureLookup::parse("r,1000,2000\n10,7.7,7.7\n50,7.7,7.7\n");
    CHECK(lookup.pressure_based());
    CHECK(lookup.mu(1500.0, 20.0) == doctest::Approx(mu_x(7.7, LongitudinalFrictionParams{})).epsilon(1e-14));
}

TEST_CASE("parameter files round trip exactly") {
    kv::Document doc;
    const LateralFrictionParams lat{2.5771234567, 0.0241, 0.99, 10522.5, 1.0};
    write_lateral(doc, lat, "lateral_front");
    LongitudinalFrictionParams lon;
    lon.B_x = 0.08637909906205427;
    write_longitudinal(doc, lon);
    const auto back = kv::Document::parse(doc.to_string());
    const auto lat2 = lateral_from(back, "lateral_front");
    CHECK(lat2.mu_zeta_y == lat.mu_zeta_y);
    CHECK(lat2.K_y == lat.K_y);
    CHECK(longitudinal_from(back).B_x == lon.B_x);
    CHECK_THROWS(lateral_from(kv::Document::parse("[lateral]\nmu_zeta_y = -1\nC_y = 0.1\nE_y = 0.9\nK_y = 1\n")));
}

}
