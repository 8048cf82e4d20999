#include "bobsled/aero.hpp"
#include "bobsled/common.hpp"

#include "doctest.h"
#include "oracles.hpp"

using namespace bobsled;
using namespace bobsled::aero;

TEST_SUITE("aero") {

TEST_CASE("drag equation") {
    AirState air;
    CHECK(drag_force(0.0, 0.5, air) == 0.0);
    CHECK(air.density() == doctest::Approx(1.199).epsilon(5e-4));
    CHECK(drag_force(10.0, 0.5, air) == doctest::Approx(29.97).epsilon(5e-4));
    CHECK(drag_force(20.0, 0.5, air) == doctest::Approx(4.0 * drag_force(10.0, 0.5, air)).epsilon(1e-14));
}

TEST_CASE("yaw-dependent drag area") {
    AeroModel m;
    m.CxAx = 0.3;
    CHECK(drag_area_at_beta(m, 0.0) == 0.3);
    CHECK(drag_area_at_beta(m, oracle::rad(1.0)) == doctest::Approx(1.0694 * 0.3).epsilon(1e-14));
    CHECK(drag_area_at_beta(m, oracle::rad(-2.0)) == drag_area_at_beta(m, oracle::rad(2.0)));
    // piecewise linear in |beta|
    const double a1 = drag_area_at_beta(m, oracle::rad(1.0)), a3 = drag_area_at_beta(m, oracle::rad(3.0));
    CHECK(drag_area_at_beta(m, oracle::rad(2.0)) == doctest::Approx(0.5 * (a1 + a3)).epsilon(1e-14));
}

TEST_CASE("Ahmed-body scaling chain") {
    CHECK(kBobAreaRatio / kAhmedAreaRatio == doctest::Approx(kAreaRatioScale).epsilon(0.01));
    CHECK(std::round(kAreaRatioScale * kAhmedYawSensitivityPerDeg * 1e4) / 1e4 == doctest::Approx(kBobYawSensitivityPerDeg));
}

TEST_CASE("actual and ideal aero force") {
    AeroModel m;
    m.CxAx = 0.2;
    m.air.p_air = 1.2 * m.air.R * m.air.T;  // rho = 1.2
    const auto f0 = aero_forces(m, 30.0, 0.0);
    CHECK(f0.actual == doctest::Approx(f0.ideal).epsilon(1e-15));
    const auto f1 = aero_forces(m, 30.0, oracle::rad(1.0));
    CHECK(f1.ideal == doctest::Approx(108.0).epsilon(1e-12));
    CHECK(f1.actual == doctest::Approx(115.4952).epsilon(1e-6));
    const auto f2 = aero_forces(m, 12.0, oracle::rad(1.0));
    CHECK(f2.actual / f2.ideal == doctest::Approx(f1.actual / f1.ideal).epsilon(1e-14));
    for (double b : {-0.2, -0.01, 0.003, 0.1}) CHECK(aero_forces(m, 25.0, b).actual > aero_forces(m, 25.0, b).ideal);
}

TEST_CASE("invalid air state and model are rejected") {
    AirState bad;
    bad.T = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    AeroModel m;
    m.yaw_sensitivity = -1.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

}
