#include "bobsled/common.hpp"
#include "bobsled/kinematics.hpp"
#include "bobsled/sim.hpp"

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace bobsled;
using namespace bobsled::sim;

namespace {

ScenarioFile straight(double kappa_deg, double v0, double length = 2000.0) {
    ScenarioFile f;
    f.scenario.t_max = 60.0;
    f.scenario.initial.v = v0;
    f.scenario.track_profile = TrackProfile::from_rows({{0.0, oracle::rad(kappa_deg), 0.0, 1.0},
                                                        {length, oracle::rad(kappa_deg), 0.0, 1.0}});
    f.models.bob = fixture::bob();
    f.models.aero.CxAx = f.models.bob.CxAx;
    return f;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("straight run stays symmetric") {
    auto f = straight(4.0, 20.0, 500.0);
    const auto r = simulate(f.scenario, f.models);
    CHECK(r.reason == StopReason::TrackEnd);
    CHECK(r.final_state.s == doctest::Approx(500.0).epsilon(1e-12));
    double prev_v = 0.0;
    for (const auto& e : r.log) {
        CHECK(e.state.beta == 0.0);
        CHECK(e.state.psi_dot == 0.0);
        CHECK(e.F_r.y() == 0.0);
        CHECK(e.state.v > prev_v);  // 4 degrees outweighs friction and drag at these speeds
        prev_v = e.state.v;
    }
}

TEST_CASE("level glide without drag decelerates at mu g") {
    auto f = straight(0.0, 10.0);
    f.scenario.t_max = 400.0;
    f.models.aero_enabled = false;
    const auto r = simulate(f.scenario, f.models);
    CHECK(r.reason == StopReason::Stopped);
    for (const auto& e : r.log) {
        CHECK(e.state.v == doctest::Approx(10.0 - 0.004 * oracle::g * e.state.t).epsilon(1e-10));
        CHECK(e.F_f.z() + e.F_r.z() == doctest::Approx(f.models.bob.m * oracle::g).epsilon(1e-12));
    }
    const double t_stop = (10.0 - f.scenario.stop_speed) / (0.004 * oracle::g);
    CHECK(r.final_state.t == doctest::Approx(t_stop).epsilon(1e-6));
    CHECK(r.final_state.v == doctest::Approx(f.scenario.stop_speed).epsilon(1e-6));
}

TEST_CASE("step steer settles to a steady yaw rate") {
    auto f = straight(1.0, 25.0, 5000.0);
    f.scenario.t_max = 12.0;
    f.scenario.controls = ControlTrace::from_rows({{0.0, 0.0, 0.0}, {5.0, 0.0, 0.0}, {5.01, oracle::rad(1.0), 0.0},
                                                   {100.0, oracle::rad(1.0), 0.0}});
    const auto r = simulate(f.scenario, f.models);
    REQUIRE(r.log.size() > 1150);
    const double late = r.log[1150].state.psi_dot, later = r.log.back().state.psi_dot;
    CHECK(std::abs(r.log[400].state.psi_dot) == 0.0);
    CHECK(std::abs(late) > 0.01);
    CHECK(later == doctest::Approx(late).epsilon(0.01));
    // steady turn: lateral specific force matches v * (psi_dot + beta_dot) with beta_dot ~ 0
    const auto& e = r.log.back();
    CHECK(e.a_cog.y() == doctest::Approx(e.state.v * e.state.psi_dot).epsilon(0.02));
}

TEST_CASE("energy audit and step-size convergence") {
    for (const char* name : {"straight", "step_steer", "corner_a"}) {
        CAPTURE(name);
        auto f = fixture::scenario(name);
        f.scenario.noise = NoiseSpec{};
        const auto r = simulate(f.scenario, f.models);
        REQUIRE(r.energy_scale > 0.0);
        CHECK(std::abs(r.energy_residual) < 5e-4 * r.energy_scale);
        auto fine = f.scenario;
        fine.dt /= 2.0;
        const auto r2 = simulate(fine, f.models);
        CHECK(r2.final_state.v == doctest::Approx(r.final_state.v).epsilon(1e-4));
        // the integrated dissipation state closes the balance up to the integration error
        CHECK(std::abs(energy_total(r.final_state, f.models) - energy_total(f.scenario.initial, f.models)) <
              1e-6 * r.energy_scale);
    }
}

TEST_CASE("loss power is non-negative") {
    auto f = fixture::scenario("step_steer");
    for (const auto& e : simulate(f.scenario, f.models).log) CHECK(e.loss_power >= 0.0);
}

TEST_CASE("reference lateral law runs and differs") {
    auto f = fixture::scenario("step_steer");
    const auto fitted = simulate(f.scenario, f.models);
    f.models.lateral_law = LateralLaw::Braghin;
    const auto braghin = simulate(f.scenario, f.models);
    CHECK(braghin.final_state.s > 0.0);
    CHECK(std::abs(braghin.energy_residual) < 5e-4 * braghin.energy_scale);
    double diff = 0.0;
    const std::size_t n = std::min(fitted.log.size(), braghin.log.size());
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(fitted.log[i].state.beta - braghin.log[i].state.beta));
    CHECK(diff > oracle::rad(0.05));
}

TEST_CASE("synthetic telemetry: sensor offset, noise, determinism") {
    auto f = fixture::scenario("step_steer");
    const auto r = simulate(f.scenario, f.models);
    const auto clean = export_synthetic_telemetry(r, f.scenario, f.models);
    REQUIRE(clean.run.size() == r.log.size());
    REQUIRE(clean.truth.size() == r.log.size());
    for (std::size_t i = 0; i < r.log.size(); i += 37) {
        const auto& e = r.log[i];
        const auto& fr = clean.run.frames[i];
        const kinematics::AngularState w{0.0, e.theta_dot, e.state.psi_dot, 0.0, e.theta_ddot, e.psi_ddot};
        const Vec3 a_s(fr.a_x, fr.a_y, fr.a_z);
        CHECK((kinematics::accel_to_cog(a_s, w, f.models.bob.sensor) - e.a_cog).norm() < 1e-9 * (1.0 + e.a_cog.norm()));
        if (std::abs(e.state.psi_dot) > 0.05) CHECK((a_s - e.a_cog).norm() > 1e-6);
    }
    f.scenario.noise.accel = 0.05;
    f.scenario.noise.seed = 3;
    const auto noisy = export_synthetic_telemetry(r, f.scenario, f.models);
    const auto again = export_synthetic_telemetry(r, f.scenario, f.models);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < r.log.size(); ++i) {
        const double d = noisy.run.frames[i].a_y - clean.run.frames[i].a_y;
        CHECK(noisy.run.frames[i].a_y == again.run.frames[i].a_y);
        sum += d;
        sq += d * d;
    }
    const double n = static_cast<double>(r.log.size());
    CHECK(std::sqrt(sq / n) == doctest::Approx(0.05).epsilon(0.1));
    CHECK(std::abs(sum / n) < 4 * 0.05 / std::sqrt(n));
    CHECK(noisy.run.meta.extra.at("noise_accel") == "0.05");
}

TEST_CASE("scenario validation") {
    auto f = straight(1.0, 20.0);
    f.scenario.dt = 0.02;
    CHECK_THROWS(f.scenario.validate());
    f.scenario.dt = 0.01;
    f.scenario.initial.v = 0.0;
    CHECK_THROWS(f.scenario.validate());
    CHECK_THROWS(TrackProfile::from_rows({{0.0, 0.0, 0.0, 0.5}, {10.0, 0.0, 0.0, 1.0}}));
    CHECK_THROWS(ControlTrace::from_rows({{0.0, 1.0, 0.0}}));
}

}
