#include "bobsled/onetrack.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bobsled::onetrack {

void BobParameters::validate() const {
    if (!(m > 0.0 && J_yy > 0.0 && J_zz > 0.0 && l_F > 0.0 && l_R > 0.0 && CxAx > 0.0)) {
        throw std::invalid_argument("bob parameters m, J_yy, J_zz, l_F, l_R, CxAx must all be > 0");
    }
}

BobParameters BobParameters::from_document(const kv::Document& doc) {
    BobParameters b;
    b.m = doc.number_or("bob.m", b.m);
    b.J_yy = doc.number_or("bob.J_yy", b.J_yy);
    b.J_zz = doc.number_or("bob.J_zz", b.J_zz);
    b.l_F = doc.number_or("bob.l_F", b.l_F);
    b.l_R = doc.number_or("bob.l_R", b.l_R);
    b.CxAx = doc.number_or("bob.CxAx", b.CxAx);
    b.sensor.l_x = doc.number_or("bob.sensor_l_x", 0.0);
    b.sensor.l_y = doc.number_or("bob.sensor_l_y", 0.0);
    b.sensor.l_z = doc.number_or("bob.sensor_l_z", 0.0);
    // speed sensor defaults to the accelerometer position
    b.sensor.l_s_f = doc.number_or("bob.l_s_f", b.l_F - b.sensor.l_x);
    b.sensor.l_s_r = doc.number_or("bob.l_s_r", -b.l_R - b.sensor.l_x);
    try {
        b.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(doc.origin() + ": " + e.what());
    }
    return b;
}

void BobParameters::write(kv::Document& doc) const {
    doc.set_number("bob.m", m);
    doc.set_number("bob.J_yy", J_yy);
    doc.set_number("bob.J_zz", J_zz);
    doc.set_number("bob.l_F", l_F);
    doc.set_number("bob.l_R", l_R);
    doc.set_number("bob.CxAx", CxAx);
    doc.set_number("bob.sensor_l_x", sensor.l_x);
    doc.set_number("bob.sensor_l_y", sensor.l_y);
    doc.set_number("bob.sensor_l_z", sensor.l_z);
    doc.set_number("bob.l_s_f", sensor.l_s_f);
    doc.set_number("bob.l_s_r", sensor.l_s_r);
}

namespace {

AxlePair split_two_point(double total, double moment, double l_F, double l_R) {
    const double wheelbase = l_F + l_R;
    return {(l_R * total + moment) / wheelbase, (l_F * total - moment) / wheelbase};
}

}  // namespace

AxlePair reconstruct_lateral(double a_y_cog, double psi_ddot, double F_y_ext, const BobParameters& bob) {
    return split_two_point(bob.m * a_y_cog - F_y_ext, bob.J_zz * psi_ddot, bob.l_F, bob.l_R);
}

AxlePair reconstruct_vertical(double a_z_cog, double theta_ddot, const BobParameters& bob) {
    return split_two_point(bob.m * a_z_cog, bob.J_yy * theta_ddot, bob.l_F, bob.l_R);
}

std::optional<double> recover_F_x_f0(double F_x_f, double F_y_f0, double F_z_f0, const Mat3& A) {
    if (std::abs(A(0, 0)) < kMinRotationDiagonal) {
        return std::nullopt;
    }
    return (F_x_f - A(0, 1) * F_y_f0 - A(0, 2) * F_z_f0) / A(0, 0);
}

Vec3 forces_to_runner_frame(const Vec3& F_f0, double gamma, double delta) {
    return kinematics::runner_from_f0(gamma, delta) * F_f0;
}

Vec3 forces_to_body_frame(const Vec3& F_f, double gamma, double delta) {
    return kinematics::runner_from_f0(gamma, delta).transpose() * F_f;
}

std::size_t AxleForceTrace::valid_count() const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const AxleSample& s) { return s.valid(); }));
}

AxleForceTrace build_axle_trace(const telemetry::TelemetryRun& run, const BobParameters& bob,
                                const friction::LongitudinalModel& front_longitudinal,
                                const aero::AeroModel& aero, const ReconstructionOptions& options) {
    if (!run.derived.has_rates() || run.derived.psi_ddot.size() != run.size()) {
        throw std::invalid_argument("build_axle_trace needs derived channels (run derive_channels first)");
    }
    bob.validate();
    const auto& d = run.derived;
    AxleForceTrace trace;
    trace.samples.reserve(run.size());
    for (std::size_t i = 0; i < run.size(); ++i) {
        const auto& f = run.frames[i];
        AxleSample out;
        out.t = f.t;
        out.s = d.s.empty() ? 0.0 : d.s[i];
        out.v = f.v;
        out.gamma = f.gamma;
        out.delta = f.delta;
        out.phi_ddot = d.phi_ddot[i];
        out.theta_ddot = d.theta_ddot[i];
        out.psi_ddot = d.psi_ddot[i];

        const kinematics::AngularState w{f.phi_dot, f.theta_dot, f.psi_dot, d.phi_ddot[i], d.theta_ddot[i], d.psi_ddot[i]};
        const Vec3 a_cog = kinematics::accel_to_cog(Vec3(f.a_x, f.a_y, f.a_z), w, bob.sensor);
        out.a_y_cog = a_cog.y();
        out.a_z_cog = a_cog.z();

        if (options.roll_threshold_deg_s2 &&
            std::abs(rad_to_deg(d.phi_ddot[i])) > *options.roll_threshold_deg_s2) {
            out.flags |= kRollAcceleration;
        }

        const auto alpha_f = kinematics::slip_angle_front(f.alpha_sensor, f.psi_dot, f.v, bob.sensor.l_s_f, f.delta);
        const auto alpha_r = kinematics::slip_angle_rear(f.alpha_sensor, f.psi_dot, f.v, bob.sensor.l_s_r);
        const auto beta = kinematics::slip_angle_at(f.alpha_sensor, f.psi_dot, f.v, bob.l_s_cog());
        if (!alpha_f || !alpha_r || !beta) {
            out.flags |= kLowSpeed;
        } else {
            out.alpha_f = *alpha_f;
            out.alpha_r = *alpha_r;
            out.beta = *beta;
        }

        if (options.aero_side_force && beta) {
            const double drag = aero::drag_force(f.v, aero::drag_area_at_beta(aero, *beta), aero.air);
            out.F_y_ext = drag * std::sin(*beta);
        }

        const auto lateral = reconstruct_lateral(out.a_y_cog, out.psi_ddot, out.F_y_ext, bob);
        const auto vertical = reconstruct_vertical(out.a_z_cog, out.theta_ddot, bob);
        out.F_y_f0 = lateral.front;
        out.F_y_r = lateral.rear;
        out.F_z_f0 = vertical.front;
        out.F_z_r = vertical.rear;
        out.r_y_track = friction::track_radius_y(f.v, f.theta_dot);

        const Mat3 A = kinematics::runner_from_f0(f.gamma, f.delta);
        if (std::abs(A(0, 0)) < kMinRotationDiagonal) {
            out.flags |= kFrontRotation;
        } else if (!(out.flags & kLowSpeed)) {
            // F_x_f depends on the runner-frame normal force, which itself depends on F_x_f0.
            double F_z_f = out.F_z_f0;
            bool converged = false;
            Vec3 F_f0(0.0, out.F_y_f0, out.F_z_f0);
            Vec3 F_f = A * F_f0;
            for (int it = 0; it < 100 && !converged; ++it) {
                const double F_x_f = front_longitudinal.force(std::max(F_z_f, 0.0), out.alpha_f, out.r_y_track);
                F_f0.x() = *recover_F_x_f0(F_x_f, out.F_y_f0, out.F_z_f0, A);
                F_f = A * F_f0;
                converged = std::abs(F_f.z() - F_z_f) <= 1e-12 * std::max(1.0, std::abs(F_z_f));
                F_z_f = F_f.z();
            }
            if (!converged) {
                out.flags |= kFrontNotConverged;
            }
            out.F_x_f0 = F_f0.x();
            out.F_x_f = F_f.x();
            out.F_y_f = F_f.y();
            out.F_z_f = F_f.z();
        }
        trace.samples.push_back(out);
    }
    return trace;
}

std::string trace_to_csv(const AxleForceTrace& trace) {
    std::ostringstream out;
    out << "t,s,v,F_x_f0,F_y_f0,F_z_f0,F_y_r,F_z_r,F_x_f,F_y_f,F_z_f,alpha_f,alpha_r,beta,gamma,delta,"
           "a_y_cog,a_z_cog,psi_ddot,theta_ddot,phi_ddot,F_y_ext,valid,flags\n";
    for (const auto& s : trace.samples) {
        for (double x : {s.t, s.s, s.v, s.F_x_f0, s.F_y_f0, s.F_z_f0, s.F_y_r, s.F_z_r, s.F_x_f, s.F_y_f,
                         s.F_z_f, s.alpha_f, s.alpha_r, s.beta, s.gamma, s.delta, s.a_y_cog, s.a_z_cog,
                         s.psi_ddot, s.theta_ddot, s.phi_ddot, s.F_y_ext}) {
            out << kv::format_double(x) << ',';
        }
        out << (s.valid() ? 1 : 0) << ',' << static_cast<int>(s.flags) << '\n';
    }
    return out.str();
}

}  // namespace bobsled::onetrack
