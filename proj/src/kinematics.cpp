#include "bobsled/kinematics.hpp"

#include <cmath>

namespace bobsled::kinematics {

Mat3 lever_arm_matrix(const AngularState& w) {
    const double p = w.phi_dot, q = w.theta_dot, r = w.psi_dot;
    Mat3 m;
    m << -q * q - r * r, p * q - w.psi_ddot, p * r + w.theta_ddot,
         p * q + w.psi_ddot, -p * p - r * r, q * r - w.phi_ddot,
         p * r - w.theta_ddot, q * r + w.phi_ddot, -p * p - q * q;
    return m;
}

Vec3 accel_to_cog(const Vec3& a_sensor, const AngularState& w, const MountingOffset& offset) {
    const Vec3 l(offset.l_x, offset.l_y, offset.l_z);
    return a_sensor - lever_arm_matrix(w) * l;
}

Vec3 accel_to_sensor(const Vec3& a_cog, const AngularState& w, const MountingOffset& offset) {
    const Vec3 l(offset.l_x, offset.l_y, offset.l_z);
    return a_cog + lever_arm_matrix(w) * l;
}

std::optional<double> slip_angle_at(double alpha_sensor, double psi_dot, double v, double l_s) {
    if (!(v > kMinSlipSpeed)) {
        return std::nullopt;
    }
    return alpha_sensor - psi_dot * l_s / v;
}

std::optional<double> slip_angle_rear(double alpha_sensor, double psi_dot, double v, double l_s_r) {
    return slip_angle_at(alpha_sensor, psi_dot, v, l_s_r);
}

std::optional<double> slip_angle_front(double alpha_sensor, double psi_dot, double v, double l_s_f, double delta) {
    auto a = slip_angle_at(alpha_sensor, psi_dot, v, l_s_f);
    if (!a) {
        return std::nullopt;
    }
    return *a + delta;
}

Mat3 rotation_gamma(double gamma) {
    const double c = std::cos(gamma), s = std::sin(gamma);
    Mat3 a;
    a << 1.0, 0.0, 0.0,
         0.0, c, -s,
         0.0, s, c;
    return a;
}

Mat3 rotation_delta(double gamma, double delta) {
    const double cg = std::cos(gamma), sg = std::sin(gamma);
    const double cd = std::cos(delta), sd = std::sin(delta);
    const double dt = 1.0 - cd;
    Mat3 a;
    a << cd, -cg * sd, -sg * sd,
         cg * sd, sg * sg * dt + cd, -sg * cg * dt,
         sg * sd, -sg * cg * dt, cg * cg * dt + cd;
    return a;
}

Mat3 rotation_f0_to_f(double gamma, double delta) { return rotation_delta(gamma, delta) * rotation_gamma(gamma); }

Mat3 runner_from_f0(double gamma, double delta) { return rotation_f0_to_f(gamma, delta).transpose(); }

Vec3 to_driving_frame(const Vec3& force, double beta) {
    const double c = std::cos(beta), s = std::sin(beta);
    return {c * force.x() - s * force.y(), s * force.x() + c * force.y(), force.z()};
}

}  // namespace bobsled::kinematics
