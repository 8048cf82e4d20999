#include "bobsled/common.hpp"
#include "bobsled/kinematics.hpp"
#include "bobsled/onetrack.hpp"
#include "bobsled/sim.hpp"
#include "bobsled/telemetry.hpp"

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace bobsled;
using onetrack::BobParameters;

namespace {

BobParameters symmetric(double m, double l) {
    BobParameters b;
    b.m = m;
    b.l_F = b.l_R = l;
    return b;
}

double rms(const std::vector<double>& x) {
    double sum = 0.0;
    for (double v : x) sum += v * v;
    return std::sqrt(sum / static_cast<double>(x.size()));
}

}  // namespace

TEST_SUITE("onetrack") {

TEST_CASE("lateral reconstruction examples") {
    const auto zero = onetrack::reconstruct_lateral(0.0, 0.0, 0.0, BobParameters{});
    CHECK(zero.front == 0.0);
    CHECK(zero.rear == 0.0);
    const auto split = onetrack::reconstruct_lateral(10.0, 0.0, 0.0, symmetric(400.0, 1.2));
    CHECK(split.front == doctest::Approx(2000.0).epsilon(1e-14));
    CHECK(split.rear == doctest::Approx(2000.0).epsilon(1e-14));
    auto couple_bob = symmetric(400.0, 1.0);
    couple_bob.J_zz = 100.0;
    const auto couple = onetrack::reconstruct_lateral(0.0, 1.0, 0.0, couple_bob);
    CHECK(couple.front == doctest::Approx(50.0).epsilon(1e-14));
    CHECK(couple.rear == doctest::Approx(-50.0).epsilon(1e-14));
}

TEST_CASE("vertical reconstruction examples") {
    const auto bob = symmetric(390.0, 1.3);
    const auto stat = onetrack::reconstruct_vertical(oracle::g, 0.0, bob);
    CHECK(stat.front == doctest::Approx(390.0 * oracle::g / 2).epsilon(1e-14));
    CHECK(stat.rear == doctest::Approx(390.0 * oracle::g / 2).epsilon(1e-14));
    const BobParameters ref;
    const auto corner = onetrack::reconstruct_vertical(4 * oracle::g, 0.0, ref);
    CHECK(corner.front + corner.rear == doctest::Approx(4 * ref.m * oracle::g).epsilon(1e-14));
    CHECK(corner.front / corner.rear == doctest::Approx(ref.l_R / ref.l_F).epsilon(1e-12));
    const auto couple = onetrack::reconstruct_vertical(0.0, 2.0, ref);
    CHECK(couple.front == doctest::Approx(-couple.rear).epsilon(1e-14));
    CHECK(couple.front > 0.0);
}

TEST_CASE("momentum closure and superposition") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    const BobParameters bob;
    for (int k = 0; k < 1000; ++k) {
        const double ay = u(rng), psi = u(rng) / 10, ext = 10 * u(rng), az = u(rng), th = u(rng) / 10;
        const auto lat = onetrack::reconstruct_lateral(ay, psi, ext, bob);
        const double r1 = bob.m * ay - ext, r2 = bob.J_zz * psi;
        CHECK(lat.front + lat.rear == doctest::Approx(r1).epsilon(1e-9).scale(1.0));
        CHECK(bob.l_F * lat.front - bob.l_R * lat.rear == doctest::Approx(r2).epsilon(1e-9).scale(1.0));
        const auto ver = onetrack::reconstruct_vertical(az, th, bob);
        CHECK(ver.front + ver.rear == doctest::Approx(bob.m * az).epsilon(1e-9).scale(1.0));
        CHECK(bob.l_F * ver.front - bob.l_R * ver.rear == doctest::Approx(bob.J_yy * th).epsilon(1e-9).scale(1.0));

        const double ay2 = u(rng), psi2 = u(rng) / 10;
        const auto a = onetrack::reconstruct_lateral(ay, psi, 0.0, bob);
        const auto b = onetrack::reconstruct_lateral(ay2, psi2, 0.0, bob);
        const auto ab = onetrack::reconstruct_lateral(ay + ay2, psi + psi2, 0.0, bob);
        CHECK(ab.front == doctest::Approx(a.front + b.front).epsilon(1e-12).scale(1.0));
        CHECK(ab.rear == doctest::Approx(a.rear + b.rear).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("longitudinal front force recovery") {
    CHECK(*onetrack::recover_F_x_f0(-12.0, 300.0, 2000.0, Mat3::Identity()) == -12.0);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> ang(-0.7, 0.7), f(-3000.0, 3000.0);
    for (int k = 0; k < 500; ++k) {
        const double gamma = ang(rng), delta = ang(rng);
        const Mat3 A = kinematics::runner_from_f0(gamma, delta);
        const Vec3 F0(f(rng), f(rng), f(rng));
        const Vec3 F = A * F0;
        const auto back = onetrack::recover_F_x_f0(F.x(), F0.y(), F0.z(), A);
        REQUIRE(back.has_value());
        CHECK(*back == doctest::Approx(F0.x()).epsilon(1e-12).scale(3000.0));
    }
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = 0.3;
    CHECK_FALSE(onetrack::recover_F_x_f0(1.0, 1.0, 1.0, bad).has_value());
}

TEST_CASE("frame rotations: identity, norm, inverse") {
    const Vec3 F(-10.0, 800.0, 3000.0);
    CHECK((onetrack::forces_to_runner_frame(F, 0.0, 0.0) - F).norm() == 0.0);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> ang(-0.7, 0.7);
    for (int k = 0; k < 500; ++k) {
        const double gamma = ang(rng), delta = ang(rng);
        const Vec3 r = onetrack::forces_to_runner_frame(F, gamma, delta);
        CHECK(r.norm() == doctest::Approx(F.norm()).epsilon(1e-13));
        CHECK((onetrack::forces_to_body_frame(r, gamma, delta) - F).norm() < 1e-12 * F.norm());
    }
}

TEST_CASE("trace: straight glide has no lateral force, vertical sums close") {
    const auto bob = fixture::bob();
    auto run = fixture::uniform_run(100.0, 300, [](telemetry::TelemetryFrame& f, double) {
        f.v = 20.0;
        f.a_z = oracle::g;
        f.a_x = -0.3;
    });
    run = telemetry::derive_channels(run);
    const auto trace = onetrack::build_axle_trace(run, bob, friction::LongitudinalModel{}, aero::AeroModel{});
    REQUIRE(trace.size() == 300);
    CHECK(trace.valid_count() == 300);
    for (const auto& s : trace.samples) {
        CHECK(s.F_y_f0 == 0.0);
        CHECK(s.F_y_r == 0.0);
        CHECK(s.F_z_f0 + s.F_z_r == doctest::Approx(bob.m * s.a_z_cog).epsilon(1e-12));
        CHECK(s.F_x_f == doctest::Approx(-0.004 * s.F_z_f).epsilon(1e-12));
        CHECK_FALSE(s.r_y_track.has_value());
    }
}

TEST_CASE("trace: front longitudinal force equals the friction law in the runner frame") {
    const auto bob = fixture::bob();
    auto run = fixture::uniform_run(100.0, 200, [](telemetry::TelemetryFrame& f, double t) {
        f.v = 25.0;
        f.a_y = 12.0 * std::sin(t);
        f.a_z = 3 * oracle::g;
        f.psi_dot = 0.3 * std::sin(2 * t);
        f.alpha_sensor = 0.02 * std::cos(t);
        f.delta = oracle::rad(2.0);
        f.gamma = oracle::rad(-1.5);
    });
    run = telemetry::derive_channels(run);
    const friction::LongitudinalModel lon;
    const auto trace = onetrack::build_axle_trace(run, bob, lon, aero::AeroModel{});
    for (const auto& s : trace.samples) {
        REQUIRE(s.valid());
        CHECK(s.F_x_f == doctest::Approx(lon.force(s.F_z_f, s.alpha_f, s.r_y_track)).epsilon(1e-10));
        const Vec3 F_f0(s.F_x_f0, s.F_y_f0, s.F_z_f0);
        const Vec3 F_f = kinematics::runner_from_f0(s.gamma, s.delta) * F_f0;
        CHECK(F_f.x() == doctest::Approx(s.F_x_f).epsilon(1e-12).scale(1.0));
        CHECK(F_f.y() == doctest::Approx(s.F_y_f).epsilon(1e-12).scale(1.0));
        CHECK(F_f.z() == doctest::Approx(s.F_z_f).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("trace: roll-acceleration samples are flagged") {
    auto run = fixture::uniform_run(100.0, 200, [](telemetry::TelemetryFrame& f, double t) {
        f.v = 20.0;
        f.a_z = oracle::g;
        // 10 deg/s over 0.05 s: 200 deg/s^2 ramp between 1.00 and 1.05 s
        f.phi_dot = oracle::rad(10.0) * std::clamp((t - 1.0) / 0.05, 0.0, 1.0);
    });
    run = telemetry::derive_channels(run);
    const auto bob = fixture::bob();
    const auto trace = onetrack::build_axle_trace(run, bob, friction::LongitudinalModel{}, aero::AeroModel{});
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const bool spike = std::abs(rad_to_deg(run.derived.phi_ddot[i])) > 100.0;
        CHECK(static_cast<bool>(trace.samples[i].flags & onetrack::kRollAcceleration) == spike);
        flagged += spike;
    }
    CHECK(flagged >= 4);
    onetrack::ReconstructionOptions off;
    off.roll_threshold_deg_s2.reset();
    CHECK(onetrack::build_axle_trace(run, bob, {}, {}, off).valid_count() == trace.size());
}

TEST_CASE("trace: low speed samples are flagged, derived channels required") {
    auto run = fixture::uniform_run(100.0, 50, [](telemetry::TelemetryFrame& f, double) { f.v = 1.0; });
    CHECK_THROWS_AS(onetrack::build_axle_trace(run, fixture::bob(), {}, {}), std::invalid_argument);
    run = telemetry::derive_channels(run);
    CHECK(onetrack::build_axle_trace(run, fixture::bob(), {}, {}).valid_count() == 0);
}

TEST_CASE("trace reproduces simulator forces within 0.5% RMS") {
    auto file = fixture::scenario("step_steer");
    const auto result = sim::simulate(file.scenario, file.models);
    const auto synth = sim::export_synthetic_telemetry(result, file.scenario, file.models);
    const auto run = telemetry::derive_channels(synth.run);
    onetrack::ReconstructionOptions opts;
    opts.aero_side_force = true;
    aero::AeroModel aero = file.models.aero;
    const auto trace = onetrack::build_axle_trace(run, file.models.bob, file.models.front_longitudinal, aero, opts);
    REQUIRE(trace.size() == synth.truth.size());

    std::vector<double> err[4], ref[4];
    for (std::size_t i = 2; i + 2 < trace.size(); ++i) {
        const auto& a = trace.samples[i];
        const auto& b = synth.truth.samples[i];
        const double got[4] = {a.F_y_f0, a.F_y_r, a.F_z_f0, a.F_z_r};
        const double want[4] = {b.F_y_f0, b.F_y_r, b.F_z_f0, b.F_z_r};
        for (int k = 0; k < 4; ++k) {
            err[k].push_back(got[k] - want[k]);
            ref[k].push_back(want[k]);
        }
    }
    for (int k = 0; k < 4; ++k) {
        CAPTURE(k);
        CHECK(rms(err[k]) < 0.005 * rms(ref[k]));
    }
}

}
