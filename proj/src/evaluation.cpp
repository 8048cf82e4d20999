#include "bobsled/evaluation.hpp"

#include "bobsled/common.hpp"
#include "bobsled/fitting.hpp"
#include "bobsled/kinematics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bobsled::evaluation {

namespace {

bool usable(const onetrack::AxleSample& s) {
    return (s.flags & ~static_cast<std::uint8_t>(onetrack::kRollAcceleration)) == 0;
}

struct Integrand {
    double s, t;
    double actual_f, ideal_f, actual_r, ideal_r, actual_aero, ideal_aero, actual_f_runner;
};

Vec3 front_runner_forces(const onetrack::AxleSample& s, const RunnerModels& m, LateralLaw law) {
    const double fz = s.F_z_f;
    if (!(fz > 0.0)) return Vec3(0.0, 0.0, fz);
    const double fx = m.front_longitudinal.force(fz, s.alpha_f, s.r_y_track);
    const double fy = law == LateralLaw::Fitted ? friction::force_y(fz, s.alpha_f, m.front_lateral)
                                                : friction::force_y_braghin(fz, s.alpha_f);
    return {fx, fy, fz};
}

Vec3 rear_runner_forces(const onetrack::AxleSample& s, const RunnerModels& m, LateralLaw law) {
    const double fz = s.F_z_r;
    if (!(fz > 0.0)) return Vec3(0.0, 0.0, fz);
    const double fx = m.rear_longitudinal.force(fz, s.alpha_r, s.r_y_track);
    const double fy = law == LateralLaw::Fitted ? friction::force_y(fz, s.alpha_r, m.rear_lateral)
                                                : friction::force_y_braghin(fz, s.alpha_r);
    return {fx, fy, fz};
}

Integrand integrand(const onetrack::AxleSample& s, const RunnerModels& m) {
    Integrand in{};
    in.s = s.s;
    in.t = s.t;
    const Vec3 F_f = front_runner_forces(s, m, LateralLaw::Fitted);
    const Vec3 F_f0 = onetrack::forces_to_body_frame(F_f, s.gamma, s.delta);
    in.actual_f = -kinematics::to_driving_frame(F_f0, s.beta).x();
    in.actual_f_runner = -kinematics::to_driving_frame(F_f, s.beta).x();
    in.ideal_f = -F_f.x();
    const Vec3 F_r = rear_runner_forces(s, m, LateralLaw::Fitted);
    in.actual_r = -kinematics::to_driving_frame(F_r, s.beta).x();
    in.ideal_r = -F_r.x();
    const auto aero = aero::aero_forces(m.aero, std::max(s.v, 0.0), s.beta);
    in.actual_aero = aero.actual;
    in.ideal_aero = aero.ideal;
    return in;
}

void finalize(LossBreakdown& b) {
    if (b.E_tot_loss > 0.0) {
        b.dE_ice_f = b.loss_f / b.E_tot_loss;
        b.dE_ice_r = b.loss_r / b.E_tot_loss;
        b.dE_aero = b.loss_aero / b.E_tot_loss;
        b.dE_ice_f_runner_frame = b.loss_f_runner_frame / b.E_tot_loss;
    } else {
        b.dE_ice_f = b.dE_ice_r = b.dE_aero = b.dE_ice_f_runner_frame = 0.0;
    }
    b.dE_tot = b.dE_ice_f + b.dE_ice_r + b.dE_aero;
}

LossBreakdown integrate(const std::vector<Integrand>& seg) {
    LossBreakdown b;
    b.samples = seg.size();
    b.s0 = seg.front().s;
    b.s1 = seg.back().s;
    b.distance = b.s1 - b.s0;
    b.runtime = seg.back().t - seg.front().t;
    for (std::size_t i = 1; i < seg.size(); ++i) {
        const auto& a = seg[i - 1];
        const auto& c = seg[i];
        const double h = 0.5 * (c.s - a.s);
        b.E_tot_loss += h * (a.ideal_f + a.ideal_r + a.ideal_aero + c.ideal_f + c.ideal_r + c.ideal_aero);
        b.loss_f += h * (a.actual_f - a.ideal_f + c.actual_f - c.ideal_f);
        b.loss_r += h * (a.actual_r - a.ideal_r + c.actual_r - c.ideal_r);
        b.loss_aero += h * (a.actual_aero - a.ideal_aero + c.actual_aero - c.ideal_aero);
        b.loss_f_runner_frame += h * (a.actual_f_runner - a.ideal_f + c.actual_f_runner - c.ideal_f);
    }
    finalize(b);
    return b;
}

}  // namespace

std::vector<LossBreakdown> loss_energies(const onetrack::AxleForceTrace& trace, const RunnerModels& models,
                                         const Window& window) {
    if (!(window.s1 > window.s0)) throw std::invalid_argument("loss window must satisfy s0 < s1");
    std::vector<LossBreakdown> out;
    std::vector<Integrand> seg;
    auto flush = [&] {
        if (seg.size() >= 2 && seg.back().s > seg.front().s) out.push_back(integrate(seg));
        seg.clear();
    };
    bool gap = false;
    for (const auto& s : trace.samples) {
        if (s.s < window.s0 || s.s > window.s1) continue;
        if (!usable(s)) {
            gap = true;
            continue;
        }
        if (gap && !seg.empty() && s.t - seg.back().t > kMaxInterpolatedGap) flush();
        gap = false;
        seg.push_back(integrand(s, models));
    }
    flush();
    if (out.empty()) {
        throw DataError("loss window holds no integrable segment of valid samples");
    }
    return out;
}

LossBreakdown combine(const std::vector<LossBreakdown>& segments) {
    if (segments.empty()) throw std::invalid_argument("combine: no segments");
    LossBreakdown b;
    b.s0 = segments.front().s0;
    b.s1 = segments.back().s1;
    for (const auto& s : segments) {
        b.E_tot_loss += s.E_tot_loss;
        b.loss_f += s.loss_f;
        b.loss_r += s.loss_r;
        b.loss_aero += s.loss_aero;
        b.loss_f_runner_frame += s.loss_f_runner_frame;
        b.runtime += s.runtime;
        b.distance += s.distance;
        b.samples += s.samples;
    }
    finalize(b);
    return b;
}

AngleSummary summarize_angles(const std::vector<double>& angles) {
    AngleSummary a;
    a.count = angles.size();
    if (angles.empty()) return a;
    std::vector<double> mag(angles.size());
    std::transform(angles.begin(), angles.end(), mag.begin(), [](double x) { return std::abs(x); });
    const double qs[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int k = 0; k < 5; ++k) a.quantiles[static_cast<std::size_t>(k)] = fitting::quantile(mag, qs[k]);
    const double n = static_cast<double>(mag.size());
    a.exceed_2deg = static_cast<double>(std::count_if(mag.begin(), mag.end(),
                                                      [](double x) { return x > deg_to_rad(2.0); })) / n;
    a.exceed_4deg = static_cast<double>(std::count_if(mag.begin(), mag.end(),
                                                      [](double x) { return x > deg_to_rad(4.0); })) / n;
    return a;
}

std::map<std::string, DriverAngles> angle_statistics(const std::vector<LabelledTrace>& runs) {
    struct Pool {
        std::vector<double> delta, alpha_f, alpha_r;
    };
    std::map<std::string, Pool> pools;
    for (const auto& run : runs) {
        if (!run.trace) throw std::invalid_argument("angle_statistics: missing trace");
        auto& p = pools[run.driver];
        for (const auto& s : run.trace->samples) {
            if (!usable(s)) continue;
            p.delta.push_back(s.delta);
            p.alpha_f.push_back(s.alpha_f);
            p.alpha_r.push_back(s.alpha_r);
        }
    }
    std::map<std::string, DriverAngles> out;
    for (const auto& [driver, p] : pools) {
        out[driver] = {summarize_angles(p.delta), summarize_angles(p.alpha_f), summarize_angles(p.alpha_r)};
    }
    return out;
}

double validate_rmse(const std::vector<double>& predicted, const std::vector<double>& measured,
                     const std::vector<bool>& mask) {
    if (predicted.size() != measured.size() || (!mask.empty() && mask.size() != predicted.size())) {
        throw std::invalid_argument("validate_rmse: series lengths differ");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        const double d = predicted[i] - measured[i];
        sum += d * d;
        ++n;
    }
    if (n == 0) throw DataError("validate_rmse: no valid samples");
    return std::sqrt(sum / static_cast<double>(n));
}

std::vector<double> predicted_lateral_force(const onetrack::AxleForceTrace& trace, const RunnerModels& models,
                                            LateralLaw law) {
    std::vector<double> out(trace.size(), 0.0);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& s = trace.samples[i];
        if (!usable(s)) continue;
        const Vec3 F_f0 = onetrack::forces_to_body_frame(front_runner_forces(s, models, law), s.gamma, s.delta);
        out[i] = F_f0.y() + rear_runner_forces(s, models, law).y();
    }
    return out;
}

std::vector<double> measured_lateral_force(const onetrack::AxleForceTrace& trace, const onetrack::BobParameters& bob) {
    std::vector<double> out(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out[i] = bob.m * trace.samples[i].a_y_cog - trace.samples[i].F_y_ext;
    }
    return out;
}

std::vector<bool> valid_mask(const onetrack::AxleForceTrace& trace) {
    std::vector<bool> out(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) out[i] = usable(trace.samples[i]);
    return out;
}

LossSummary summarize_losses(const std::vector<const RunEvaluation*>& runs) {
    LossSummary out;
    out.runs = runs.size();
    if (runs.empty()) return out;
    for (std::size_t k = 0; k < 4; ++k) {
        std::vector<double> v;
        for (const auto* r : runs) {
            const auto& t = r->total;
            v.push_back(k == 0 ? t.dE_ice_f : k == 1 ? t.dE_ice_r : k == 2 ? t.dE_aero : t.dE_tot);
        }
        out.median[k] = fitting::quantile(v, 0.5);
        double sum = 0.0;
        for (double x : v) sum += x;
        out.mean[k] = sum / static_cast<double>(v.size());
    }
    return out;
}

EvaluationReport build_report(std::vector<RunEvaluation> runs, const std::vector<LabelledTrace>& traces) {
    EvaluationReport report;
    report.runs = std::move(runs);
    report.driver_angles = angle_statistics(traces);
    std::map<std::string, std::vector<const RunEvaluation*>> by_driver, by_track;
    for (const auto& r : report.runs) {
        by_driver[r.driver].push_back(&r);
        by_track[r.track].push_back(&r);
    }
    for (const auto& [k, v] : by_driver) report.per_driver[k] = summarize_losses(v);
    for (const auto& [k, v] : by_track) report.per_track[k] = summarize_losses(v);
    return report;
}

namespace {

nlohmann::json to_json(const LossBreakdown& b) {
    return {{"E_tot_loss", b.E_tot_loss},
            {"dE_ice_f", b.dE_ice_f},
            {"dE_ice_r", b.dE_ice_r},
            {"dE_aero", b.dE_aero},
            {"dE_tot", b.dE_tot},
            {"dE_ice_f_runner_frame", b.dE_ice_f_runner_frame},
            {"s0", b.s0},
            {"s1", b.s1},
            {"runtime", b.runtime},
            {"distance", b.distance},
            {"samples", b.samples}};
}

nlohmann::json to_json(const AngleSummary& a) {
    return {{"count", a.count},
            {"min", a.quantiles[0]},
            {"q25", a.quantiles[1]},
            {"median", a.quantiles[2]},
            {"q75", a.quantiles[3]},
            {"max", a.quantiles[4]},
            {"exceed_2deg", a.exceed_2deg},
            {"exceed_4deg", a.exceed_4deg}};
}

nlohmann::json to_json(const LossSummary& s) {
    const char* names[4] = {"dE_ice_f", "dE_ice_r", "dE_aero", "dE_tot"};
    nlohmann::json j = {{"runs", s.runs}};
    for (std::size_t k = 0; k < 4; ++k) {
        j["median"][names[k]] = s.median[k];
        j["mean"][names[k]] = s.mean[k];
    }
    return j;
}

}  // namespace

std::string report_json(const EvaluationReport& report, int indent) {
    nlohmann::json j;
    j["runs"] = nlohmann::json::array();
    for (const auto& r : report.runs) {
        nlohmann::json jr = {{"name", r.name},
                             {"driver", r.driver},
                             {"track", r.track},
                             {"total", to_json(r.total)},
                             {"rmse_fitted", r.rmse_fitted},
                             {"rmse_braghin", r.rmse_braghin}};
        jr["segments"] = nlohmann::json::array();
        for (const auto& s : r.segments) jr["segments"].push_back(to_json(s));
        j["runs"].push_back(std::move(jr));
    }
    for (const auto& [driver, a] : report.driver_angles) {
        j["drivers"][driver]["angles"] = {
            {"delta", to_json(a.delta)}, {"alpha_f", to_json(a.alpha_f)}, {"alpha_r", to_json(a.alpha_r)}};
    }
    for (const auto& [driver, s] : report.per_driver) j["drivers"][driver]["losses"] = to_json(s);
    for (const auto& [track, s] : report.per_track) j["tracks"][track]["losses"] = to_json(s);
    return j.dump(indent);
}

std::string losses_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << "run,driver,track,E_tot_loss,dE_ice_f,dE_ice_r,dE_aero,dE_tot,runtime,distance\n";
    for (const auto& r : report.runs) {
        const auto& t = r.total;
        out << r.name << ',' << r.driver << ',' << r.track;
        for (double x : {t.E_tot_loss, t.dE_ice_f, t.dE_ice_r, t.dE_aero, t.dE_tot, t.runtime, t.distance}) {
            out << ',' << kv::format_double(x);
        }
        out << '\n';
    }
    return out.str();
}

std::string angles_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << "driver,angle,count,min,q25,median,q75,max,exceed_2deg,exceed_4deg\n";
    for (const auto& [driver, a] : report.driver_angles) {
        const std::pair<const char*, const AngleSummary*> rows[3] = {
            {"delta", &a.delta}, {"alpha_f", &a.alpha_f}, {"alpha_r", &a.alpha_r}};
        for (const auto& [name, s] : rows) {
            out << driver << ',' << name << ',' << s->count;
            for (double q : s->quantiles) out << ',' << kv::format_double(q);
            out << ',' << kv::format_double(s->exceed_2deg) << ',' << kv::format_double(s->exceed_4deg) << '\n';
        }
    }
    return out.str();
}

}  // namespace bobsled::evaluation
