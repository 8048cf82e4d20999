#pragma once

#include "bobsled/aero.hpp"
#include "bobsled/friction.hpp"
#include "bobsled/kvtext.hpp"
#include "bobsled/onetrack.hpp"
#include "bobsled/telemetry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bobsled::sim {

// Piecewise-linear breakpoint table.
class Breakpoints {
public:
    Breakpoints() = default;
    Breakpoints(std::vector<double> x, std::vector<std::vector<double>> columns);

    [[nodiscard]] double value(std::size_t column, double x) const;  // clamped outside the table
    [[nodiscard]] double slope(std::size_t column, double x) const;  // 0 outside the table
    [[nodiscard]] bool empty() const { return x_.empty(); }
    [[nodiscard]] double front() const { return x_.front(); }
    [[nodiscard]] double back() const { return x_.back(); }

private:
    std::vector<double> x_;
    std::vector<std::vector<double>> cols_;
};

// Track along s: slope kappa [rad] (positive downhill), pitch curvature 1/r_y [1/m]
// (theta_dot = -v / r_y) and normal-load factor n >= 1 (banking folded in).
struct TrackProfile {
    Breakpoints table;  // columns: kappa, inv_r_y, n

    [[nodiscard]] double length() const { return table.back(); }
    [[nodiscard]] double kappa(double s) const { return table.value(0, s); }
    [[nodiscard]] double inv_r_y(double s) const { return table.value(1, s); }
    [[nodiscard]] double inv_r_y_slope(double s) const { return table.slope(1, s); }
    [[nodiscard]] double n(double s) const { return table.value(2, s); }

    // rows "s, kappa [rad], inv_r_y, n"
    static TrackProfile from_rows(const std::vector<std::vector<double>>& rows);
};

struct ControlTrace {
    Breakpoints table;  // columns: delta, gamma [rad]

    [[nodiscard]] double delta(double t) const { return table.empty() ? 0.0 : table.value(0, t); }
    [[nodiscard]] double gamma(double t) const { return table.empty() ? 0.0 : table.value(1, t); }

    static ControlTrace from_rows(const std::vector<std::vector<double>>& rows);
};

struct SimState {
    double t = 0.0;
    double s = 0.0;        // m
    double v = 0.0;        // m/s, COG speed
    double beta = 0.0;     // rad, runner-slip convention
    double psi_dot = 0.0;  // rad/s
    double h = 0.0;        // m, altitude relative to the start
    double E_loss = 0.0;   // J, energy dissipated by runners and aero
};

enum class LateralLaw { Fitted, Braghin };

struct SimModels {
    onetrack::BobParameters bob;
    friction::LongitudinalModel front_longitudinal;
    friction::LongitudinalModel rear_longitudinal;
    friction::LateralFrictionParams front_lateral = friction::LateralFrictionParams::front_reference();
    friction::LateralFrictionParams rear_lateral = friction::LateralFrictionParams::rear_reference();
    LateralLaw lateral_law = LateralLaw::Fitted;
    aero::AeroModel aero;
    bool aero_enabled = true;
};

struct NoiseSpec {
    std::uint64_t seed = 1;
    double accel = 0.0;  // m/s^2
    double rate = 0.0;   // rad/s
    double angle = 0.0;  // rad (slip, steering, roll-split)
    double speed = 0.0;  // m/s
};

struct Scenario {
    std::string name = "scenario";
    std::string driver = "SIM";
    std::string track = "SIM";
    double dt = 0.01;  // s, <= 0.01
    double t_max = 60.0;
    double stop_speed = 1.0;  // m/s
    SimState initial;
    TrackProfile track_profile;
    ControlTrace controls;
    NoiseSpec noise;

    void validate() const;
};

// Forces and kinematics at one instant (also the logged ground truth).
struct Evaluation {
    SimState state;
    double v_dot = 0.0, beta_dot = 0.0, psi_ddot = 0.0;
    double theta_dot = 0.0, theta_ddot = 0.0;
    double alpha_f = 0.0, alpha_r = 0.0, delta = 0.0, gamma = 0.0;
    Vec3 F_f, F_f0, F_r;   // runner frame / body frame at the front axle / rear runner
    double drag = 0.0;     // N, along -velocity
    Vec3 a_cog;            // specific force at the COG, body frame
    double loss_power = 0.0;  // W, >= 0 when runner forces and drag dissipate
    std::optional<double> r_y_track;
    int fz_iterations = 0;
};

Evaluation evaluate(const SimState& state, const Scenario& scenario, const SimModels& models);

// One classical fourth-order Runge-Kutta step of (s, v, beta, psi_dot, h, E_loss).
SimState step(const SimState& state, const Scenario& scenario, const SimModels& models, double dt);

enum class StopReason { TrackEnd, Stopped, TimeLimit };

struct SimResult {
    std::vector<Evaluation> log;  // uniform steps
    SimState final_state;         // exactly at the stop event
    StopReason reason = StopReason::TimeLimit;
    double energy_residual = 0.0;      // J, change of E_kin + E_rot + E_pot + E_loss over the run
    double energy_scale = 0.0;         // J, E_loss at the end (total dissipated)
};

SimResult simulate(const Scenario& scenario, const SimModels& models);

// Kinetic (translation + yaw) plus potential plus dissipated energy.
double energy_total(const SimState& state, const SimModels& models);

struct Synthetic {
    telemetry::TelemetryRun run;
    onetrack::AxleForceTrace truth;
};

// Sensor-frame channels at the configured mounting offset (optionally noisy) and
// the logged ground-truth trace.
Synthetic export_synthetic_telemetry(const SimResult& result, const Scenario& scenario, const SimModels& models);

// Scenario text: [scenario] dt, t_max, v0, beta0_deg, psi_dot0, stop_speed, name, driver, track;
// [noise] seed, accel, rate, angle_deg, speed; [track] rows "s, kappa_deg, inv_r_y, n";
// [controls] rows "t, delta_deg, gamma_deg"; [bob], [aero], [longitudinal], [lateral_front],
// [lateral_rear], [friction] mu_x, rear_mu_x, lateral_law = fitted|braghin.
struct ScenarioFile {
    Scenario scenario;
    SimModels models;
};

ScenarioFile scenario_from(const kv::Document& doc);

}  // namespace bobsled::sim
