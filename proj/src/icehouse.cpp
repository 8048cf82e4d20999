#include "bobsled/icehouse.hpp"

#include "bobsled/common.hpp"
#include "bobsled/kvtext.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bobsled::icehouse {

void GlideRun::validate() const {
    if (s.size() != v.size() || (!h.empty() && h.size() != s.size())) {
        throw DataError("glide run: channel lengths differ");
    }
    if (s.size() < 2) throw DataError("glide run: fewer than 2 samples");
    if (!(m > 0.0)) throw DataError("glide run: mass must be > 0");
    if (!(CxAx >= 0.0)) throw DataError("glide run: CxAx must be >= 0");
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!(s[i] > s[i - 1])) throw DataError("glide run: distance must increase (sled stopped?)");
    }
    air.validate();
}

GlideRun GlideRun::parse(std::string_view text, const std::string& origin) {
    GlideRun run;
    std::vector<double> t;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    std::size_t start = 0;
    auto meta_number = [&](const std::string& key, const std::string& value) {
        return kv::parse_double(value, origin + ": metadata '" + key + "'");
    };
    bool have_mass = false, have_cxax = false;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = kv::trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto body = line.substr(1);
            auto eq = body.find('=');
            if (eq == std::string::npos) continue;
            auto key = kv::trim(std::string_view(body).substr(0, eq));
            auto value = kv::trim(std::string_view(body).substr(eq + 1));
            if (key == "mass") {
                run.m = meta_number(key, value);
                have_mass = true;
            } else if (key == "p_air") {
                run.air.p_air = meta_number(key, value);
            } else if (key == "T") {
                run.air.T = meta_number(key, value);
            } else if (key == "R") {
                run.air.R = meta_number(key, value);
            } else if (key == "CxAx") {
                run.CxAx = meta_number(key, value);
                have_cxax = true;
            } else if (key == "kappa_deg") {
                run.kappa = deg_to_rad(meta_number(key, value));
            } else if (key == "pressure") {
                run.pressure = meta_number(key, value);
            } else if (key == "specimen") {
                run.specimen = value;
            } else if (key == "direction") {
                if (value == "up") {
                    run.direction = Direction::Up;
                } else if (value == "down") {
                    run.direction = Direction::Down;
                } else {
                    throw DataError(origin + ": direction must be 'up' or 'down'");
                }
            }
            continue;
        }
        const auto cells = kv::split(line, ',');
        if (header.empty()) {
            header = cells;
            continue;
        }
        const std::string where = origin + ":" + std::to_string(line_no);
        auto col = [&](const char* name) -> std::optional<std::size_t> {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) return std::nullopt;
            return static_cast<std::size_t>(it - header.begin());
        };
        const auto ct = col("t"), cv = col("v"), ch = col("h");
        if (!ct || !cv) throw DataError(origin + ": glide CSV needs columns t and v");
        if (cells.size() != header.size()) throw DataError(where + ": wrong number of fields");
        t.push_back(kv::parse_double(cells[*ct], where));
        run.v.push_back(kv::parse_double(cells[*cv], where));
        if (ch) run.h.push_back(kv::parse_double(cells[*ch], where));
        if (t.size() > 1 && !(t.back() > t[t.size() - 2])) {
            throw DataError(where + ": time not strictly increasing");
        }
    }
    if (!have_mass) throw DataError(origin + ": missing '# mass = ...' metadata");
    if (!have_cxax) throw DataError(origin + ": missing '# CxAx = ...' metadata");
    if (t.size() < 2) throw DataError(origin + ": fewer than 2 samples");
    run.s.assign(t.size(), 0.0);
    for (std::size_t i = 1; i < t.size(); ++i) {
        run.s[i] = run.s[i - 1] + 0.5 * (run.v[i] + run.v[i - 1]) * (t[i] - t[i - 1]);
    }
    run.validate();
    return run;
}

GlideRun GlideRun::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

EnergySeries energy_series(const GlideRun& run) {
    run.validate();
    if (run.h.empty() && !run.kappa) {
        throw DataError("glide run has neither altitude samples nor a slope angle");
    }
    const std::size_t n = run.s.size();
    EnergySeries out;
    out.s = run.s;
    out.energy.assign(n, 0.0);
    double e_aero = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const double f0 = drag_force(run.v[i - 1], run.CxAx, run.air);
            const double f1 = drag_force(run.v[i], run.CxAx, run.air);
            e_aero += 0.5 * (f0 + f1) * (run.s[i] - run.s[i - 1]);
        }
        const double dh = run.h.empty() ? -(run.s[i] - run.s[0]) * std::sin(*run.kappa) : run.h[i] - run.h[0];
        const double e_pot = run.m * kGravity * dh;
        const double e_kin = 0.5 * run.m * (run.v[i] * run.v[i] - run.v[0] * run.v[0]);
        out.energy[i] = e_pot + e_kin + e_aero;
    }
    return out;
}

EnergyBreakdown energy_breakdown(const GlideRun& run, std::size_t i0, std::size_t i1) {
    if (!(i0 < i1 && i1 < run.s.size())) throw std::invalid_argument("energy_breakdown: bad section");
    if (run.h.empty() && !run.kappa) {
        throw DataError("glide run has neither altitude samples nor a slope angle");
    }
    EnergyBreakdown e;
    const double dh = run.h.empty() ? -(run.s[i1] - run.s[i0]) * std::sin(*run.kappa) : run.h[i1] - run.h[i0];
    e.E_pot = run.m * kGravity * dh;
    e.E_kin = 0.5 * run.m * (run.v[i1] * run.v[i1] - run.v[i0] * run.v[i0]);
    for (std::size_t i = i0 + 1; i <= i1; ++i) {
        e.E_aero += 0.5 * (drag_force(run.v[i - 1], run.CxAx, run.air) + drag_force(run.v[i], run.CxAx, run.air)) *
                    (run.s[i] - run.s[i - 1]);
    }
    e.E_ice = -(e.E_pot + e.E_kin + e.E_aero);
    return e;
}

Window middle_window(const GlideRun& run, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("window fraction must lie in (0, 1]");
    }
    const double s0 = run.s.front(), s1 = run.s.back();
    const double margin = 0.5 * (1.0 - fraction) * (s1 - s0);
    return {s0 + margin, s1 - margin};
}

ForceFit friction_force_fit(const EnergySeries& series, const Window& window) {
    ForceFit fit;
    fit.window = window;
    std::vector<double> e;
    for (std::size_t i = 0; i < series.s.size(); ++i) {
        if (series.s[i] >= window.s0 && series.s[i] <= window.s1) {
            fit.s.push_back(series.s[i]);
            e.push_back(series.energy[i]);
        }
    }
    fit.n = fit.s.size();
    if (fit.n < kMinWindowSamples) {
        throw DataError("friction fit window holds " + std::to_string(fit.n) + " samples, need at least " +
                        std::to_string(kMinWindowSamples));
    }
    const double n = static_cast<double>(fit.n);
    double mean_s = 0.0, mean_e = 0.0;
    for (std::size_t i = 0; i < fit.n; ++i) {
        mean_s += fit.s[i];
        mean_e += e[i];
    }
    mean_s /= n;
    mean_e /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < fit.n; ++i) {
        sxx += (fit.s[i] - mean_s) * (fit.s[i] - mean_s);
        sxy += (fit.s[i] - mean_s) * (e[i] - mean_e);
    }
    if (!(sxx > 0.0)) {
        throw DataError("friction fit window is degenerate (no spread in distance)");
    }
    const double slope = sxy / sxx;
    fit.intercept = mean_e - slope * mean_s;
    double ssr = 0.0;
    fit.residuals.resize(fit.n);
    for (std::size_t i = 0; i < fit.n; ++i) {
        fit.residuals[i] = e[i] - (fit.intercept + slope * fit.s[i]);
        ssr += fit.residuals[i] * fit.residuals[i];
    }
    fit.F_ice = -slope;
    fit.std_error = std::sqrt(ssr / (n - 2.0) / sxx);
    return fit;
}

double mu_from_force(double F_ice, double m, double kappa) {
    if (!(m > 0.0)) throw std::invalid_argument("mass must be > 0");
    return std::abs(F_ice) / (m * kGravity * std::cos(kappa));
}

double average_bidirectional(double mu_up, double mu_down) { return 0.5 * (mu_up + mu_down); }

FrictionEstimate estimate_friction(const GlideRun& run, double window_fraction) {
    FrictionEstimate est;
    const auto series = energy_series(run);
    est.fit = friction_force_fit(series, middle_window(run, window_fraction));
    const double kappa = run.kappa.value_or(0.0);
    est.mu = mu_from_force(est.fit.F_ice, run.m, kappa);
    est.mu_std_error = est.fit.std_error / (run.m * kGravity * std::cos(kappa));
    return est;
}

friction::LongitudinalFrictionParams fit_quadratic_mu_p(const std::vector<PressurePoint>& points, double E_x) {
    if (points.size() < 3) {
        throw NumericalError("quadratic mu(p) fit needs at least 3 points");
    }
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = points[static_cast<std::size_t>(i)].p;
        X(i, 0) = p * p;
        X(i, 1) = -p;
        X(i, 2) = 1.0;
        y(i) = 1e3 * points[static_cast<std::size_t>(i)].mu;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-12);
    if (qr.rank() < 3) {
        throw NumericalError("quadratic mu(p) fit is rank deficient (need 3 distinct pressures)");
    }
    const Eigen::Vector3d c = qr.solve(y);
    friction::LongitudinalFrictionParams params;
    params.B_x = c(0);
    params.C_x = c(1);
    params.D_x = c(2);
    params.E_x = E_x;
    params.zeta_x = 1.0;
    return params;
}

std::vector<PressurePoint> parse_pressure_points(std::string_view text, const std::string& origin) {
    std::vector<PressurePoint> points;
    double scale = 1.0;
    std::size_t line_no = 0, start = 0;
    bool first = true;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = kv::trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto cells = kv::split(line, ',');
        if (first) {
            first = false;
            if (cells.size() >= 2 && cells[0] == "p") {
                scale = cells[1] == "mu_1e3" ? 1e-3 : 1.0;
                continue;
            }
        }
        const std::string where = origin + ":" + std::to_string(line_no);
        if (cells.size() < 2) throw DataError(where + ": expected 'p,mu'");
        points.push_back({kv::parse_double(cells[0], where), scale * kv::parse_double(cells[1], where)});
    }
    return points;
}

}  // namespace bobsled::icehouse
