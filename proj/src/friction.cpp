#include "bobsled/friction.hpp"

#include "bobsled/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bobsled::friction {

void LongitudinalFrictionParams::validate() const {
    if (!(B_x > 0.0)) throw std::invalid_argument("B_x must be > 0");
    if (!(E_x > 0.0)) throw std::invalid_argument("E_x must be > 0");
    if (!(zeta_x >= 1.0)) throw std::invalid_argument("zeta_x must be >= 1");
    if (!std::isfinite(C_x) || !std::isfinite(D_x)) throw std::invalid_argument("C_x and D_x must be finite");
}

void LateralFrictionParams::validate() const {
    if (!(mu_zeta_y > 0.0)) throw std::invalid_argument("mu_zeta_y must be > 0");
    if (!(C_y > 0.0 && C_y < 2.0)) throw std::invalid_argument("C_y must lie in (0, 2)");
    if (!(K_y > 0.0)) throw std::invalid_argument("K_y must be > 0");
    if (!(E_y > 0.0 && E_y <= 1.0)) throw std::invalid_argument("E_y must lie in (0, 1]");
    if (!(zeta_tuning > 0.0)) throw std::invalid_argument("zeta_tuning must be > 0");
}

double mu_x(double p_mpa, const LongitudinalFrictionParams& params) {
    if (!(p_mpa > 0.0)) {
        throw std::invalid_argument("contact pressure must be > 0 MPa");
    }
    const double quadratic = params.B_x * p_mpa * p_mpa - params.C_x * p_mpa + params.D_x;
    const double mu = 1e-3 * params.zeta_x * quadratic;
    return std::clamp(mu, 0.0, params.E_x);
}

double force_x_fixed(double F_z, double alpha, double mu) { return -mu * F_z * std::cos(alpha); }

double force_x(double F_z, double alpha, double p_mpa, const LongitudinalFrictionParams& params) {
    return force_x_fixed(F_z, alpha, mu_x(p_mpa, params));
}

double force_y(double F_z, double alpha, const LateralFrictionParams& params) {
    if (!(F_z > 0.0)) {
        throw std::invalid_argument("force_y needs F_z > 0");
    }
    const double peak = params.mu_zeta_y * params.zeta_tuning;
    const double b = params.K_y / (params.C_y * peak * F_z);
    const double x = b * alpha;
    return peak * F_z * std::sin(params.C_y * std::atan(x - params.E_y * (x - std::atan(x))));
}

double force_y_braghin(double F_z, double alpha) {
    return kBraghinMuY * F_z * (2.0 / std::numbers::pi) * std::atan(kBraghinK3 * alpha);
}

std::optional<double> track_radius_y(double v, double theta_dot) {
    if (std::abs(theta_dot) <= kMinPitchRate) {
        return std::nullopt;
    }
    return -v / theta_dot;
}

PressureLookup::PressureLookup(std::vector<double> fz_axis, std::vector<double> radius_axis,
                               std::vector<std::vector<double>> values)
    : fz_(std::move(fz_axis)), r_(std::move(radius_axis)), p_(std::move(values)) {
    auto increasing = [](const std::vector<double>& v) {
        return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(b > a); }) == v.end();
    };
    if (fz_.empty() || r_.empty()) throw DataError("pressure table: empty axis");
    if (!increasing(fz_) || !increasing(r_)) throw DataError("pressure table: axes must be strictly increasing");
    if (p_.size() != r_.size()) throw DataError("pressure table: row count does not match radius axis");
    for (const auto& row : p_) {
        if (row.size() != fz_.size()) throw DataError("pressure table: row length does not match F_z axis");
        for (double p : row) {
            if (!(p > 0.0)) throw DataError("pressure table: pressures must be > 0");
        }
    }
}

PressureLookup PressureLookup::parse(std::string_view text, const std::string& origin) {
    std::vector<std::vector<std::string>> rows;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = kv::trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty() || line.front() == '#') continue;
        rows.push_back(kv::split(line, ','));
    }
    if (rows.size() < 2) {
        throw DataError(origin + ": pressure table needs a header row and at least one data row");
    }
    std::vector<double> fz;
    for (std::size_t j = 1; j < rows[0].size(); ++j) {
        fz.push_back(kv::parse_double(rows[0][j], origin + ": header"));
    }
    std::vector<double> r;
    std::vector<std::vector<double>> p;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::string where = origin + ": row " + std::to_string(i + 1);
        if (rows[i].size() != fz.size() + 1) {
            throw DataError(where + ": expected " + std::to_string(fz.size() + 1) + " fields");
        }
        r.push_back(kv::parse_double(rows[i][0], where));
        std::vector<double> row;
        for (std::size_t j = 1; j < rows[i].size(); ++j) {
            row.push_back(kv::parse_double(rows[i][j], where));
        }
        p.push_back(std::move(row));
    }
    try {
        return PressureLookup(std::move(fz), std::move(r), std::move(p));
    } catch (const DataError& e) {
        throw DataError(origin + ": " + e.what());
    }
}

PressureLookup PressureLookup::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

namespace {

// index of the cell and interpolation weight along a clamped axis
std::pair<std::size_t, double> locate(const std::vector<double>& axis, double x) {
    if (axis.size() == 1 || x <= axis.front()) return {0, 0.0};
    if (x >= axis.back()) return {axis.size() - 2, 1.0};
    auto it = std::upper_bound(axis.begin(), axis.end(), x);
    const auto i = static_cast<std::size_t>(it - axis.begin()) - 1;
    return {i, (x - axis[i]) / (axis[i + 1] - axis[i])};
}

}  // namespace

double PressureLookup::lookup(double F_z, std::optional<double> r_y_track) const {
    if (p_.empty()) throw DataError("pressure table is empty");
    const double r = r_y_track.value_or(r_.back());
    auto [i, wr] = locate(r_, r);
    auto [j, wf] = locate(fz_, F_z);
    auto at = [&](std::size_t ri, std::size_t fj) {
        return p_[std::min(ri, r_.size() - 1)][std::min(fj, fz_.size() - 1)];
    };
    const double p00 = at(i, j), p01 = at(i, j + 1), p10 = at(i + 1, j), p11 = at(i + 1, j + 1);
    return (1.0 - wr) * ((1.0 - wf) * p00 + wf * p01) + wr * ((1.0 - wf) * p10 + wf * p11);
}

double lookup_pressure(const PressureLookup& table, double F_z, std::optional<double> r_y_track) {
    return table.lookup(F_z, r_y_track);
}

double LongitudinalModel::mu(double F_z, std::optional<double> r_y_track) const {
    if (!pressure_based()) {
        return fixed_mu;
    }
    return mu_x(pressure->lookup(F_z, r_y_track), *params);
}

double LongitudinalModel::force(double F_z, double alpha, std::optional<double> r_y_track) const {
    return force_x_fixed(F_z, alpha, mu(F_z, r_y_track));
}

LongitudinalFrictionParams longitudinal_from(const kv::Document& doc, const std::string& section) {
    const auto key = [&](const char* name) { return section + "." + name; };
    LongitudinalFrictionParams p;
    p.B_x = doc.number(key("B_x"));
    p.C_x = doc.number(key("C_x"));
    p.D_x = doc.number(key("D_x"));
    p.E_x = doc.number_or(key("E_x"), p.E_x);
    p.zeta_x = doc.number_or(key("zeta_x"), 1.0);
    p.validate();
    return p;
}

LateralFrictionParams lateral_from(const kv::Document& doc, const std::string& section) {
    const auto key = [&](const char* name) { return section + "." + name; };
    LateralFrictionParams p;
    p.mu_zeta_y = doc.number(key("mu_zeta_y"));
    p.C_y = doc.number(key("C_y"));
    p.E_y = doc.number(key("E_y"));
    p.K_y = doc.number(key("K_y"));
    p.zeta_tuning = doc.number_or(key("zeta_tuning"), 1.0);
    p.validate();
    return p;
}

void write_longitudinal(kv::Document& doc, const LongitudinalFrictionParams& p, const std::string& section) {
    doc.set_number(section + ".B_x", p.B_x);
    doc.set_number(section + ".C_x", p.C_x);
    doc.set_number(section + ".D_x", p.D_x);
    doc.set_number(section + ".E_x", p.E_x);
    doc.set_number(section + ".zeta_x", p.zeta_x);
}

void write_lateral(kv::Document& doc, const LateralFrictionParams& p, const std::string& section) {
    doc.set_number(section + ".mu_zeta_y", p.mu_zeta_y);
    doc.set_number(section + ".C_y", p.C_y);
    doc.set_number(section + ".E_y", p.E_y);
    doc.set_number(section + ".K_y", p.K_y);
    doc.set_number(section + ".zeta_tuning", p.zeta_tuning);
}

}  // namespace bobsled::friction
