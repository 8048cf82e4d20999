#pragma once

#include "bobsled/kvtext.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bobsled::friction {

// mu_x = min{1e-3 * zeta_x * (B_x p^2 - C_x p + D_x), E_x}, clamped at 0; p in MPa.
// E_x caps the final coefficient.
struct LongitudinalFrictionParams {
    double B_x = 0.088;
    double C_x = 2.01;
    double D_x = 14.66;
    double E_x = 0.007;
    double zeta_x = 1.0;

    void validate() const;
};

// Magic-Formula style lateral law with B_y = K_y / (C_y * mu_zeta_y * F_z).
struct LateralFrictionParams {
    double mu_zeta_y = 2.577;
    double C_y = 0.024;
    double E_y = 0.99;
    double K_y = 10522.0;  // N/rad
    double zeta_tuning = 1.0;  // extra asperity factor multiplying mu_zeta_y

    void validate() const;

    static LateralFrictionParams front_reference() { return {2.577, 0.024, 0.99, 10522.0, 1.0}; }
    static LateralFrictionParams rear_reference() { return {3.288, 0.076, 0.99, 49776.0, 1.0}; }
};

inline constexpr double kDefaultMuX = 0.004;
inline constexpr double kBraghinMuY = 0.5;
inline constexpr double kBraghinK3 = 50.0;  // 1/rad
inline constexpr double kMinPitchRate = 1e-3;  // rad/s

double mu_x(double p_mpa, const LongitudinalFrictionParams& params);
double force_x(double F_z, double alpha, double p_mpa, const LongitudinalFrictionParams& params);
double force_x_fixed(double F_z, double alpha, double mu);

double force_y(double F_z, double alpha, const LateralFrictionParams& params);
double force_y_braghin(double F_z, double alpha);

// r_y = -v / theta_dot; nullopt ("flat") when |theta_dot| <= kMinPitchRate.
std::optional<double> track_radius_y(double v, double theta_dot);

// Contact pressure [MPa] over (track radius [m], F_z [N]).
class PressureLookup {
public:
    PressureLookup() = default;
    PressureLookup(std::vector<double> fz_axis, std::vector<double> radius_axis,
                   std::vector<std::vector<double>> values);  // values[radius][fz]

    // Text grid: first row "<label>,Fz_1,Fz_2,..."; following rows "r_i,p_i1,p_i2,...".
    static PressureLookup parse(std::string_view text, const std::string& origin = "<table>");
    static PressureLookup load(const std::filesystem::path& path);

    // Bilinear inside the grid, clamped to the edge outside. A flat radius
    // (nullopt) uses the largest-radius row.
    [[nodiscard]] double lookup(double F_z, std::optional<double> r_y_track) const;

    [[nodiscard]] const std::vector<double>& fz_axis() const { return fz_; }
    [[nodiscard]] const std::vector<double>& radius_axis() const { return r_; }

private:
    std::vector<double> fz_, r_;
    std::vector<std::vector<double>> p_;
};

double lookup_pressure(const PressureLookup& table, double F_z, std::optional<double> r_y_track);

// Longitudinal friction of one runner: either the pressure-dependent law with a
// lookup, or a fixed coefficient.
struct LongitudinalModel {
    double fixed_mu = kDefaultMuX;
    std::optional<LongitudinalFrictionParams> params;
    std::optional<PressureLookup> pressure;

    [[nodiscard]] bool pressure_based() const { return params.has_value() && pressure.has_value(); }
    [[nodiscard]] double mu(double F_z, std::optional<double> r_y_track) const;
    [[nodiscard]] double force(double F_z, double alpha, std::optional<double> r_y_track) const;
};

// Parameter files: [longitudinal] / [lateral] sections of key/value text.
LongitudinalFrictionParams longitudinal_from(const kv::Document& doc, const std::string& section = "longitudinal");
LateralFrictionParams lateral_from(const kv::Document& doc, const std::string& section = "lateral");
void write_longitudinal(kv::Document& doc, const LongitudinalFrictionParams& p,
                        const std::string& section = "longitudinal");
void write_lateral(kv::Document& doc, const LateralFrictionParams& p, const std::string& section = "lateral");

}  // namespace bobsled::friction
