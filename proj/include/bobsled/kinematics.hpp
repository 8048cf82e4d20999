#pragma once

// Rigid-body transforms for the one-track bobsled model.
//
// Conventions: body x forward, y left, z up (right-handed). delta > 0 steers left.
// Slip angles (alpha at runners and sensor, beta at the COG) use the runner-slip
// convention: positive when the velocity vector points to the right (-y) of the
// runner/body axis. With it a positive slip produces a positive (+y) lateral
// friction force, and the driving-direction rotation below maps x onto the
// direction of travel.

#include "bobsled/common.hpp"

#include <optional>

namespace bobsled::kinematics {

// Sensor position relative to the COG, and signed x-distances from the speed
// sensor to the front and rear axle (positive = axle ahead of the sensor).
struct MountingOffset {
    double l_x = 0.0, l_y = 0.0, l_z = 0.0;
    double l_s_f = 0.0;
    double l_s_r = 0.0;
};

struct RotationAngles {
    double gamma = 0.0;
    double delta = 0.0;
    double beta = 0.0;
};

struct AngularState {
    double phi_dot = 0.0, theta_dot = 0.0, psi_dot = 0.0;
    double phi_ddot = 0.0, theta_ddot = 0.0, psi_ddot = 0.0;
};

inline constexpr double kMinSlipSpeed = 2.0;  // m/s

// Rate/acceleration matrix M such that a_sensor = a_cog + M * l.
Mat3 lever_arm_matrix(const AngularState& w);

// a_cog = a_sensor - M * l
Vec3 accel_to_cog(const Vec3& a_sensor, const AngularState& w, const MountingOffset& offset);
// inverse of accel_to_cog
Vec3 accel_to_sensor(const Vec3& a_cog, const AngularState& w, const MountingOffset& offset);

// Slip angle at a point `l_s` ahead of the speed sensor. nullopt when v <= kMinSlipSpeed.
std::optional<double> slip_angle_at(double alpha_sensor, double psi_dot, double v, double l_s);
std::optional<double> slip_angle_rear(double alpha_sensor, double psi_dot, double v, double l_s_r);
std::optional<double> slip_angle_front(double alpha_sensor, double psi_dot, double v, double l_s_f, double delta);

Mat3 rotation_gamma(double gamma);
// Steering rotation about the roll-split-tilted axis, entries as in the model derivation.
Mat3 rotation_delta(double gamma, double delta);
// f0 -> f frame: A = A_delta * A_gamma
Mat3 rotation_f0_to_f(double gamma, double delta);
// Map used for actual force triples, F_f = M * F_f0 with M = A^T. A rotates the
// runner by +delta (steering left), so body-frame coordinates go to the runner
// frame through its transpose; this keeps runner friction dissipative under the
// slip-angle convention above.
Mat3 runner_from_f0(double gamma, double delta);

// z-rotation onto the driving direction (x~ along the travel direction).
Vec3 to_driving_frame(const Vec3& force, double beta);

}  // namespace bobsled::kinematics
