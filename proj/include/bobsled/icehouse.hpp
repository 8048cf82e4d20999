#pragma once

#include "bobsled/aero.hpp"
#include "bobsled/friction.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bobsled::icehouse {

using aero::AirState;
using aero::drag_force;

enum class Direction { Up, Down };

// Gliding phase of one ice-house run, sampled along distance.
struct GlideRun {
    std::vector<double> s;  // m
    std::vector<double> v;  // m/s
    std::vector<double> h;  // m, optional (empty when not measured)
    std::optional<Direction> direction;
    double m = 0.0;  // kg
    AirState air;
    double CxAx = 0.0;             // m^2
    std::optional<double> kappa;   // slope along travel [rad], positive = downhill
    std::string specimen;
    std::optional<double> pressure;  // MPa, when known for the specimen

    void validate() const;

    // Glide CSV: "# key = value" metadata lines (mass, p_air, T, R, CxAx, direction,
    // kappa_deg, specimen, pressure), then columns t, v and optional h.
    static GlideRun parse(std::string_view text, const std::string& origin = "<glide>");
    static GlideRun load(const std::filesystem::path& path);
};

struct EnergyBreakdown {
    double E_pot = 0.0, E_kin = 0.0, E_aero = 0.0, E_ice = 0.0;  // J, changes over the section
};

// Cumulative E_pot + E_kin + E_aero relative to the first sample.
struct EnergySeries {
    std::vector<double> s;
    std::vector<double> energy;
};

EnergySeries energy_series(const GlideRun& run);
EnergyBreakdown energy_breakdown(const GlideRun& run, std::size_t i0, std::size_t i1);

struct Window {
    double s0 = 0.0, s1 = 0.0;
};

// Central `fraction` of the gliding phase.
Window middle_window(const GlideRun& run, double fraction = 0.6);

struct ForceFit {
    double F_ice = 0.0;      // N, minus the slope
    double std_error = 0.0;  // N
    double intercept = 0.0;
    std::size_t n = 0;
    Window window;
    std::vector<double> s, residuals;
};

inline constexpr std::size_t kMinWindowSamples = 20;

ForceFit friction_force_fit(const EnergySeries& series, const Window& window);

double mu_from_force(double F_ice, double m, double kappa);
double average_bidirectional(double mu_up, double mu_down);

struct FrictionEstimate {
    double mu = 0.0;
    double mu_std_error = 0.0;
    ForceFit fit;
};

// energy series -> middle window fit -> coefficient (kappa from the run, 0 when unknown)
FrictionEstimate estimate_friction(const GlideRun& run, double window_fraction = 0.6);

struct PressurePoint {
    double p = 0.0;   // MPa
    double mu = 0.0;  // dimensionless
};

// Least squares for 1e3 * mu = B p^2 - C p + D with zeta_x = 1; E_x passed through.
friction::LongitudinalFrictionParams fit_quadratic_mu_p(const std::vector<PressurePoint>& points,
                                                        double E_x = 0.007);

// "p,mu" CSV (mu dimensionless, or with a header naming the column mu_1e3 for values in 1e-3).
std::vector<PressurePoint> parse_pressure_points(std::string_view text, const std::string& origin = "<points>");

}  // namespace bobsled::icehouse
