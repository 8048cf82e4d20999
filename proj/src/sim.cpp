#include "bobsled/sim.hpp"

#include "bobsled/common.hpp"
#include "bobsled/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bobsled::sim {

Breakpoints::Breakpoints(std::vector<double> x, std::vector<std::vector<double>> columns)
    : x_(std::move(x)), cols_(std::move(columns)) {
    if (x_.empty()) throw ConfigError("breakpoint table is empty");
    for (std::size_t i = 1; i < x_.size(); ++i) {
        if (!(x_[i] > x_[i - 1])) throw ConfigError("breakpoints must be strictly increasing");
    }
    for (const auto& c : cols_) {
        if (c.size() != x_.size()) throw ConfigError("breakpoint column length mismatch");
    }
}

double Breakpoints::value(std::size_t column, double x) const {
    const auto& y = cols_.at(column);
    if (x <= x_.front()) return y.front();
    if (x >= x_.back()) return y.back();
    const auto i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
    const double w = (x - x_[i]) / (x_[i + 1] - x_[i]);
    return y[i] + w * (y[i + 1] - y[i]);
}

double Breakpoints::slope(std::size_t column, double x) const {
    const auto& y = cols_.at(column);
    if (x < x_.front() || x >= x_.back()) return 0.0;
    const auto i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
    return (y[i + 1] - y[i]) / (x_[i + 1] - x_[i]);
}

namespace {

Breakpoints table_from_rows(const std::vector<std::vector<double>>& rows, std::size_t columns, const char* what) {
    if (rows.empty()) throw ConfigError(std::string(what) + " table has no rows");
    std::vector<double> x;
    std::vector<std::vector<double>> cols(columns);
    for (const auto& r : rows) {
        if (r.size() != columns + 1) {
            throw ConfigError(std::string(what) + " rows need " + std::to_string(columns + 1) + " values");
        }
        x.push_back(r[0]);
        for (std::size_t k = 0; k < columns; ++k) cols[k].push_back(r[k + 1]);
    }
    return Breakpoints(std::move(x), std::move(cols));
}

}  // namespace

TrackProfile TrackProfile::from_rows(const std::vector<std::vector<double>>& rows) {
    TrackProfile p{table_from_rows(rows, 3, "track")};
    for (const auto& r : rows) {
        if (!(r[3] >= 1.0)) throw ConfigError("track normal-load factor n must be >= 1");
    }
    if (!(p.length() > 0.0)) throw ConfigError("track must end at s > 0");
    return p;
}

ControlTrace ControlTrace::from_rows(const std::vector<std::vector<double>>& rows) {
    ControlTrace c{table_from_rows(rows, 2, "control")};
    for (const auto& r : rows) {
        if (!(std::abs(r[1]) < std::numbers::pi / 4 && std::abs(r[2]) < std::numbers::pi / 4)) {
            throw ConfigError("control angles must satisfy |delta|, |gamma| < pi/4");
        }
    }
    return c;
}

void Scenario::validate() const {
    if (!(dt > 0.0 && dt <= 0.01)) throw ConfigError("simulation step must satisfy 0 < dt <= 0.01 s");
    if (!(t_max > 0.0)) throw ConfigError("t_max must be > 0");
    if (!(stop_speed > 0.0)) throw ConfigError("stop_speed must be > 0");
    if (!(initial.v > stop_speed)) throw ConfigError("initial speed must exceed stop_speed");
    if (track_profile.table.empty()) throw ConfigError("scenario has no track profile");
    if (!(noise.accel >= 0.0 && noise.rate >= 0.0 && noise.angle >= 0.0 && noise.speed >= 0.0)) {
        throw ConfigError("noise levels must be >= 0");
    }
}

namespace {

Vec3 runner_forces(const friction::LongitudinalModel& lon, const friction::LateralFrictionParams& lat,
                   LateralLaw law, double F_z, double alpha, std::optional<double> r_y) {
    if (!(F_z > 0.0)) return Vec3(0.0, 0.0, F_z);
    const double fy = law == LateralLaw::Fitted ? friction::force_y(F_z, alpha, lat)
                                                : friction::force_y_braghin(F_z, alpha);
    return {lon.force(F_z, alpha, r_y), fy, F_z};
}

}  // namespace

Evaluation evaluate(const SimState& state, const Scenario& scenario, const SimModels& models) {
    const auto& bob = models.bob;
    const double v = state.v;
    if (!(v > 0.0)) throw NumericalError("simulator speed dropped to zero inside a step");
    Evaluation e;
    e.state = state;
    e.delta = scenario.controls.delta(state.t);
    e.gamma = scenario.controls.gamma(state.t);
    const double kappa = scenario.track_profile.kappa(state.s);
    const double curv = scenario.track_profile.inv_r_y(state.s);
    const double curv_slope = scenario.track_profile.inv_r_y_slope(state.s);
    const double a_z = scenario.track_profile.n(state.s) * kGravity * std::cos(kappa);

    e.alpha_f = state.beta - state.psi_dot * bob.l_F / v + e.delta;
    e.alpha_r = state.beta + state.psi_dot * bob.l_R / v;
    e.theta_dot = -v * curv;
    e.r_y_track = friction::track_radius_y(v, e.theta_dot);

    const Mat3 M = kinematics::runner_from_f0(e.gamma, e.delta);
    const Vec3 dir(std::cos(state.beta), -std::sin(state.beta), 0.0);   // driving direction
    const Vec3 nrm(std::sin(state.beta), std::cos(state.beta), 0.0);    // left of it
    e.drag = 0.0;
    if (models.aero_enabled) {
        e.drag = aero::drag_force(v, aero::drag_area_at_beta(models.aero, state.beta), models.aero.air);
    }
    const Vec3 F_aero = -e.drag * dir;

    // pitch acceleration depends on v_dot, which depends on the normal forces
    double v_dot = 0.0;
    Vec3 F_ng;
    for (int outer = 0; outer < 50; ++outer) {
        e.theta_ddot = -(v_dot * curv + v * v * curv_slope);
        const auto vertical = onetrack::reconstruct_vertical(a_z, e.theta_ddot, bob);

        double fz_f = vertical.front;
        for (e.fz_iterations = 0; e.fz_iterations < 100; ++e.fz_iterations) {
            e.F_f = runner_forces(models.front_longitudinal, models.front_lateral, models.lateral_law, fz_f,
                                  e.alpha_f, e.r_y_track);
            const Vec3 body = M.transpose() * e.F_f;
            const double next = fz_f + (vertical.front - body.z()) / M(2, 2);
            const bool done = std::abs(next - fz_f) <= 1e-13 * std::max(1.0, std::abs(fz_f));
            fz_f = next;
            if (done) break;
        }
        e.F_f = runner_forces(models.front_longitudinal, models.front_lateral, models.lateral_law, fz_f, e.alpha_f,
                              e.r_y_track);
        e.F_f0 = M.transpose() * e.F_f;
        e.F_r = runner_forces(models.rear_longitudinal, models.rear_lateral, models.lateral_law, vertical.rear,
                              e.alpha_r, e.r_y_track);
        F_ng = e.F_f0 + e.F_r + F_aero;
        const double next = F_ng.dot(dir) / bob.m + kGravity * std::sin(kappa);
        const bool done = std::abs(next - v_dot) <= 1e-14 * (1.0 + std::abs(next));
        v_dot = next;
        if (done) break;
    }
    e.v_dot = v_dot;
    e.theta_ddot = -(v_dot * curv + v * v * curv_slope);
    e.beta_dot = state.psi_dot - F_ng.dot(nrm) / (bob.m * v);
    e.psi_ddot = (bob.l_F * e.F_f0.y() - bob.l_R * e.F_r.y()) / bob.J_zz;
    e.a_cog = Vec3(F_ng.x() / bob.m, F_ng.y() / bob.m, a_z);

    // power of each force at its own contact point
    const double u = v * std::cos(state.beta), w = -v * std::sin(state.beta);
    const double p_front = e.F_f0.x() * u + e.F_f0.y() * (w + state.psi_dot * bob.l_F);
    const double p_rear = e.F_r.x() * u + e.F_r.y() * (w - state.psi_dot * bob.l_R);
    const double p_aero = F_aero.x() * u + F_aero.y() * w;
    e.loss_power = -(p_front + p_rear + p_aero);
    return e;
}

namespace {

struct Deriv {
    double s, v, beta, psi_dot, h, E_loss;
};

Deriv derivative(const SimState& st, const Scenario& sc, const SimModels& m) {
    const auto e = evaluate(st, sc, m);
    const double kappa = sc.track_profile.kappa(st.s);
    return {st.v, e.v_dot, e.beta_dot, e.psi_ddot, -st.v * std::sin(kappa), e.loss_power};
}

SimState advance(const SimState& st, const Deriv& d, double h) {
    SimState out = st;
    out.t += h;
    out.s += h * d.s;
    out.v += h * d.v;
    out.beta += h * d.beta;
    out.psi_dot += h * d.psi_dot;
    out.h += h * d.h;
    out.E_loss += h * d.E_loss;
    return out;
}

}  // namespace

SimState step(const SimState& state, const Scenario& scenario, const SimModels& models, double dt) {
    const Deriv k1 = derivative(state, scenario, models);
    const Deriv k2 = derivative(advance(state, k1, 0.5 * dt), scenario, models);
    const Deriv k3 = derivative(advance(state, k2, 0.5 * dt), scenario, models);
    const Deriv k4 = derivative(advance(state, k3, dt), scenario, models);
    auto comb = [](double a, double b, double c, double d) { return (a + 2.0 * b + 2.0 * c + d) / 6.0; };
    const Deriv k{comb(k1.s, k2.s, k3.s, k4.s),          comb(k1.v, k2.v, k3.v, k4.v),
                  comb(k1.beta, k2.beta, k3.beta, k4.beta), comb(k1.psi_dot, k2.psi_dot, k3.psi_dot, k4.psi_dot),
                  comb(k1.h, k2.h, k3.h, k4.h),          comb(k1.E_loss, k2.E_loss, k3.E_loss, k4.E_loss)};
    SimState out = advance(state, k, dt);
    out.t = state.t + dt;
    return out;
}

double energy_total(const SimState& state, const SimModels& models) {
    const auto& b = models.bob;
    return 0.5 * b.m * state.v * state.v + 0.5 * b.J_zz * state.psi_dot * state.psi_dot +
           b.m * kGravity * state.h + state.E_loss;
}

namespace {

// Shortest step h in (0, dt] at which g(step(state, h)) reaches zero; g < 0 at h = 0.
template <class G>
double locate_event(const SimState& state, const Scenario& sc, const SimModels& m, double dt, G g) {
    double lo = 0.0, hi = dt;
    for (int i = 0; i < 80 && hi - lo > 1e-15 * dt; ++i) {
        const double mid = 0.5 * (lo + hi);
        SimState trial;
        bool ok = true;
        try {
            trial = step(state, sc, m, mid);
        } catch (const NumericalError&) {
            ok = false;
        }
        if (!ok || g(trial) >= 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

}  // namespace

SimResult simulate(const Scenario& scenario, const SimModels& models) {
    scenario.validate();
    models.bob.validate();
    SimResult result;
    SimState state = scenario.initial;
    result.log.push_back(evaluate(state, scenario, models));
    const double L = scenario.track_profile.length();
    const auto end_of_track = [&](const SimState& s) { return s.s - L; };
    const auto stopped = [&](const SimState& s) { return scenario.stop_speed - s.v; };
    const auto time_up = [&](const SimState& s) { return s.t - scenario.t_max; };

    while (true) {
        const double dt = scenario.dt;
        SimState next;
        bool failed = false;
        try {
            next = step(state, scenario, models, dt);
        } catch (const NumericalError&) {
            failed = true;  // speed crossed zero inside the step
        }
        if (!failed && !std::isfinite(next.v + next.beta + next.psi_dot)) {
            throw NumericalError("simulator state became non-finite at t = " + kv::format_double(state.t));
        }
        const bool hit_end = failed || end_of_track(next) >= 0.0;
        const bool hit_stop = failed || stopped(next) >= 0.0;
        const bool hit_time = failed || time_up(next) >= -1e-12 * scenario.t_max;
        if (!hit_end && !hit_stop && !hit_time) {
            state = next;
            result.log.push_back(evaluate(state, scenario, models));
            continue;
        }
        double h = dt;
        StopReason reason = StopReason::TimeLimit;
        const double h_time = std::min(dt, scenario.t_max - state.t);
        h = h_time;
        if (hit_end) {
            const double h_end = locate_event(state, scenario, models, dt, end_of_track);
            if (h_end <= h) {
                h = h_end;
                reason = StopReason::TrackEnd;
            }
        }
        if (hit_stop) {
            const double h_stop = locate_event(state, scenario, models, dt, stopped);
            if (h_stop < h) {
                h = h_stop;
                reason = StopReason::Stopped;
            }
        }
        result.final_state = step(state, scenario, models, h);
        result.reason = reason;
        break;
    }

    // energy audit from the logged loss powers (trapezoidal in time)
    std::vector<std::pair<double, double>> power;
    for (const auto& e : result.log) power.emplace_back(e.state.t, e.loss_power);
    power.emplace_back(result.final_state.t, evaluate(result.final_state, scenario, models).loss_power);
    double dissipated = 0.0;
    for (std::size_t i = 1; i < power.size(); ++i) {
        dissipated += 0.5 * (power[i].second + power[i - 1].second) * (power[i].first - power[i - 1].first);
    }
    auto mech = [&](const SimState& s) {
        const auto& b = models.bob;
        return 0.5 * b.m * s.v * s.v + 0.5 * b.J_zz * s.psi_dot * s.psi_dot + b.m * kGravity * s.h;
    };
    result.energy_scale = dissipated;
    result.energy_residual = mech(result.final_state) - mech(scenario.initial) + dissipated;
    return result;
}

Synthetic export_synthetic_telemetry(const SimResult& result, const Scenario& scenario, const SimModels& models) {
    const auto& bob = models.bob;
    std::mt19937_64 rng(scenario.noise.seed);
    auto noisy = [&](double x, double sigma) {
        if (sigma <= 0.0) return x;
        std::normal_distribution<double> d(0.0, sigma);
        return x + d(rng);
    };
    Synthetic out;
    out.run.meta.driver_id = scenario.driver;
    out.run.meta.track_id = scenario.track;
    out.run.meta.sample_rate = 1.0 / scenario.dt;
    out.run.meta.extra["scenario"] = scenario.name;
    out.run.meta.extra["noise_seed"] = std::to_string(scenario.noise.seed);
    out.run.meta.extra["noise_accel"] = kv::format_double(scenario.noise.accel);
    out.run.meta.extra["noise_rate"] = kv::format_double(scenario.noise.rate);
    out.run.meta.extra["noise_angle"] = kv::format_double(scenario.noise.angle);
    out.run.meta.extra["noise_speed"] = kv::format_double(scenario.noise.speed);
    for (const auto& e : result.log) {
        const auto& st = e.state;
        const kinematics::AngularState w{0.0, e.theta_dot, st.psi_dot, 0.0, e.theta_ddot, e.psi_ddot};
        const Vec3 a_s = kinematics::accel_to_sensor(e.a_cog, w, bob.sensor);
        telemetry::TelemetryFrame f;
        f.t = st.t;
        f.a_x = noisy(a_s.x(), scenario.noise.accel);
        f.a_y = noisy(a_s.y(), scenario.noise.accel);
        f.a_z = noisy(a_s.z(), scenario.noise.accel);
        f.phi_dot = noisy(0.0, scenario.noise.rate);
        f.theta_dot = noisy(e.theta_dot, scenario.noise.rate);
        f.psi_dot = noisy(st.psi_dot, scenario.noise.rate);
        f.v = noisy(st.v, scenario.noise.speed);
        f.alpha_sensor = noisy(st.beta + st.psi_dot * bob.l_s_cog() / st.v, scenario.noise.angle);
        f.delta = noisy(e.delta, scenario.noise.angle);
        f.gamma = noisy(e.gamma, scenario.noise.angle);
        out.run.frames.push_back(f);
        out.run.derived.h.push_back(st.h);

        onetrack::AxleSample a;
        a.t = st.t;
        a.s = st.s;
        a.v = st.v;
        a.F_x_f0 = e.F_f0.x();
        a.F_y_f0 = e.F_f0.y();
        a.F_z_f0 = e.F_f0.z();
        a.F_y_r = e.F_r.y();
        a.F_z_r = e.F_r.z();
        a.F_x_f = e.F_f.x();
        a.F_y_f = e.F_f.y();
        a.F_z_f = e.F_f.z();
        a.alpha_f = e.alpha_f;
        a.alpha_r = e.alpha_r;
        a.beta = st.beta;
        a.gamma = e.gamma;
        a.delta = e.delta;
        a.a_y_cog = e.a_cog.y();
        a.a_z_cog = e.a_cog.z();
        a.psi_ddot = e.psi_ddot;
        a.theta_ddot = e.theta_ddot;
        a.phi_ddot = 0.0;
        a.F_y_ext = e.drag * std::sin(st.beta);
        a.r_y_track = e.r_y_track;
        if (!(st.v > kinematics::kMinSlipSpeed)) a.flags |= onetrack::kLowSpeed;
        out.truth.samples.push_back(a);
    }
    return out;
}

namespace {

std::vector<std::vector<double>> numeric_rows(const kv::Document& doc, const std::string& section) {
    std::vector<std::vector<double>> rows;
    for (const auto& line : doc.rows(section)) {
        std::vector<double> r;
        for (const auto& cell : kv::split(line, ',')) {
            r.push_back(kv::parse_double(kv::trim(cell), doc.origin() + " [" + section + "]"));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

ScenarioFile scenario_from(const kv::Document& doc) {
    ScenarioFile f;
    auto& sc = f.scenario;
    sc.name = doc.get("scenario.name").value_or(sc.name);
    sc.driver = doc.get("scenario.driver").value_or(sc.driver);
    sc.track = doc.get("scenario.track").value_or(sc.track);
    sc.dt = doc.number_or("scenario.dt", sc.dt);
    sc.t_max = doc.number_or("scenario.t_max", sc.t_max);
    sc.stop_speed = doc.number_or("scenario.stop_speed", sc.stop_speed);
    sc.initial.v = doc.number("scenario.v0");
    sc.initial.beta = deg_to_rad(doc.number_or("scenario.beta0_deg", 0.0));
    sc.initial.psi_dot = doc.number_or("scenario.psi_dot0", 0.0);
    sc.noise.seed = static_cast<std::uint64_t>(doc.number_or("noise.seed", 1.0));
    sc.noise.accel = doc.number_or("noise.accel", 0.0);
    sc.noise.rate = doc.number_or("noise.rate", 0.0);
    sc.noise.angle = deg_to_rad(doc.number_or("noise.angle_deg", 0.0));
    sc.noise.speed = doc.number_or("noise.speed", 0.0);

    auto track = numeric_rows(doc, "track");
    if (track.empty()) throw ConfigError(doc.origin() + ": scenario needs a [track] table");
    for (auto& r : track) {
        if (r.size() > 1) r[1] = deg_to_rad(r[1]);
    }
    sc.track_profile = TrackProfile::from_rows(track);
    auto controls = numeric_rows(doc, "controls");
    for (auto& r : controls) {
        for (std::size_t k = 1; k < r.size(); ++k) r[k] = deg_to_rad(r[k]);
    }
    if (!controls.empty()) sc.controls = ControlTrace::from_rows(controls);

    auto& m = f.models;
    m.bob = onetrack::BobParameters::from_document(doc);
    m.aero.CxAx = doc.number_or("aero.CxAx", m.bob.CxAx);
    m.aero.yaw_sensitivity = doc.number_or("aero.yaw_sensitivity", m.aero.yaw_sensitivity);
    m.aero.air.p_air = doc.number_or("aero.p_air", m.aero.air.p_air);
    m.aero.air.T = doc.number_or("aero.T", m.aero.air.T);
    m.aero.air.R = doc.number_or("aero.R", m.aero.air.R);
    m.aero_enabled = doc.number_or("aero.enabled", 1.0) != 0.0;
    m.front_longitudinal.fixed_mu = doc.number_or("friction.mu_x", friction::kDefaultMuX);
    m.rear_longitudinal.fixed_mu = doc.number_or("friction.rear_mu_x", friction::kDefaultMuX);
    if (doc.has_section("lateral_front")) m.front_lateral = friction::lateral_from(doc, "lateral_front");
    if (doc.has_section("lateral_rear")) m.rear_lateral = friction::lateral_from(doc, "lateral_rear");
    const auto law = doc.get("friction.lateral_law").value_or("fitted");
    if (law == "braghin") {
        m.lateral_law = LateralLaw::Braghin;
    } else if (law != "fitted") {
        throw ConfigError(doc.origin() + ": friction.lateral_law must be 'fitted' or 'braghin'");
    }
    try {
        m.aero.validate();
        sc.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(doc.origin() + ": " + e.what());
    }
    return f;
}

}  // namespace bobsled::sim
