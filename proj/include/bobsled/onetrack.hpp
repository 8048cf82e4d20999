#pragma once

#include "bobsled/aero.hpp"
#include "bobsled/common.hpp"
#include "bobsled/friction.hpp"
#include "bobsled/kinematics.hpp"
#include "bobsled/kvtext.hpp"
#include "bobsled/telemetry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace bobsled::onetrack {

struct BobParameters {
    double m = 390.0;      // kg
    double J_yy = 420.0;   // kg m^2
    double J_zz = 430.0;   // kg m^2
    double l_F = 1.45;     // COG to front axle [m]
    double l_R = 1.15;     // COG to rear axle [m]
    double CxAx = 0.3;     // m^2
    kinematics::MountingOffset sensor;

    void validate() const;
    // Distance from the speed sensor to the COG along x (same sign convention as l_s_f / l_s_r).
    [[nodiscard]] double l_s_cog() const { return sensor.l_s_f - l_F; }

    static BobParameters from_document(const kv::Document& doc);  // [bob] section
    void write(kv::Document& doc) const;
};

struct AxlePair {
    double front;
    double rear;
};

// F_f0 + F_r = m a_y - F_y_ext ; l_F F_f0 - l_R F_r = J_zz psi_ddot
AxlePair reconstruct_lateral(double a_y_cog, double psi_ddot, double F_y_ext, const BobParameters& bob);
// F_f0 + F_r = m a_z ; l_F F_f0 - l_R F_r = J_yy theta_ddot
AxlePair reconstruct_vertical(double a_z_cog, double theta_ddot, const BobParameters& bob);

inline constexpr double kMinRotationDiagonal = 0.5;

// Solves the x-row of F_f = A F_f0 for F_x_f0 (A: the f0 -> runner map actually used,
// see kinematics::runner_from_f0). nullopt when |A(0,0)| < kMinRotationDiagonal.
std::optional<double> recover_F_x_f0(double F_x_f, double F_y_f0, double F_z_f0, const Mat3& A);

Vec3 forces_to_runner_frame(const Vec3& F_f0, double gamma, double delta);
Vec3 forces_to_body_frame(const Vec3& F_f, double gamma, double delta);

enum SampleFlag : std::uint8_t {
    kLowSpeed = 1u << 0,
    kRollAcceleration = 1u << 1,
    kFrontRotation = 1u << 2,
    kFrontNotConverged = 1u << 3,
};

struct AxleSample {
    double t = 0.0, s = 0.0, v = 0.0;
    double F_x_f0 = 0.0, F_y_f0 = 0.0, F_z_f0 = 0.0;
    double F_y_r = 0.0, F_z_r = 0.0;
    double F_x_f = 0.0, F_y_f = 0.0, F_z_f = 0.0;
    double alpha_f = 0.0, alpha_r = 0.0, beta = 0.0;
    double gamma = 0.0, delta = 0.0;
    double a_y_cog = 0.0, a_z_cog = 0.0;
    double psi_ddot = 0.0, theta_ddot = 0.0, phi_ddot = 0.0;
    double F_y_ext = 0.0;
    std::optional<double> r_y_track;
    std::uint8_t flags = 0;

    [[nodiscard]] bool valid() const { return flags == 0; }
};

struct AxleForceTrace {
    std::vector<AxleSample> samples;

    [[nodiscard]] std::size_t size() const { return samples.size(); }
    [[nodiscard]] std::size_t valid_count() const;
};

struct ReconstructionOptions {
    std::optional<double> roll_threshold_deg_s2 = 100.0;
    // Adds the lateral component of the yaw-dependent aero drag as F_y_ext.
    bool aero_side_force = false;
};

AxleForceTrace build_axle_trace(const telemetry::TelemetryRun& run, const BobParameters& bob,
                                const friction::LongitudinalModel& front_longitudinal,
                                const aero::AeroModel& aero, const ReconstructionOptions& options = {});

std::string trace_to_csv(const AxleForceTrace& trace);

}  // namespace bobsled::onetrack
