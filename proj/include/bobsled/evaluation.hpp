#pragma once

#include "bobsled/aero.hpp"
#include "bobsled/friction.hpp"
#include "bobsled/onetrack.hpp"
#include "bobsled/telemetry.hpp"

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bobsled::evaluation {

// Friction and aero models applied to the reconstructed normal forces and slip angles.
struct RunnerModels {
    friction::LongitudinalModel front_longitudinal;
    friction::LongitudinalModel rear_longitudinal;  // fixed default coefficient unless configured
    friction::LateralFrictionParams front_lateral = friction::LateralFrictionParams::front_reference();
    friction::LateralFrictionParams rear_lateral = friction::LateralFrictionParams::rear_reference();
    aero::AeroModel aero;
};

// All loss terms are integrals over s of motion-opposing magnitudes; dE terms are
// fractions of E_tot_loss.
struct LossBreakdown {
    double E_tot_loss = 0.0;  // J
    double dE_ice_f = 0.0, dE_ice_r = 0.0, dE_aero = 0.0, dE_tot = 0.0;
    double loss_f = 0.0, loss_r = 0.0, loss_aero = 0.0;  // J, actual minus ideal
    // front term with the runner-frame triple projected instead of the f0 triple
    double dE_ice_f_runner_frame = 0.0;
    double loss_f_runner_frame = 0.0;
    double s0 = 0.0, s1 = 0.0;
    double runtime = 0.0;   // s
    double distance = 0.0;  // m
    std::size_t samples = 0;
};

inline constexpr double kMaxInterpolatedGap = 0.1;  // s

struct Window {
    double s0 = -std::numeric_limits<double>::infinity();
    double s1 = std::numeric_limits<double>::infinity();
};

// One breakdown per contiguous segment; gaps of invalid samples longer than
// kMaxInterpolatedGap split the window, shorter ones are bridged linearly.
std::vector<LossBreakdown> loss_energies(const onetrack::AxleForceTrace& trace, const RunnerModels& models,
                                         const Window& window = {});

// Sums the absolute integrals of several segments into one breakdown.
LossBreakdown combine(const std::vector<LossBreakdown>& segments);

struct AngleSummary {
    std::size_t count = 0;
    std::array<double, 5> quantiles{};  // min, q25, median, q75, max of |angle| [rad]
    double exceed_2deg = 0.0;           // fraction with |angle| > 2 deg
    double exceed_4deg = 0.0;
};

AngleSummary summarize_angles(const std::vector<double>& angles);

struct DriverAngles {
    AngleSummary delta, alpha_f, alpha_r;
};

struct LabelledTrace {
    std::string driver;
    std::string track;
    const onetrack::AxleForceTrace* trace = nullptr;
};

std::map<std::string, DriverAngles> angle_statistics(const std::vector<LabelledTrace>& runs);

// Root mean square difference over samples where mask is true (all when empty).
double validate_rmse(const std::vector<double>& predicted, const std::vector<double>& measured,
                     const std::vector<bool>& mask = {});

enum class LateralLaw { Fitted, Braghin };

// F_y at the COG from the runner models: rear force plus the front runner triple rotated back.
std::vector<double> predicted_lateral_force(const onetrack::AxleForceTrace& trace, const RunnerModels& models,
                                            LateralLaw law);
// m * a_y,cog - F_y,ext
std::vector<double> measured_lateral_force(const onetrack::AxleForceTrace& trace, const onetrack::BobParameters& bob);
std::vector<bool> valid_mask(const onetrack::AxleForceTrace& trace);

struct RunEvaluation {
    std::string name, driver, track;
    std::vector<LossBreakdown> segments;
    LossBreakdown total;
    double rmse_fitted = 0.0, rmse_braghin = 0.0;
};

struct LossSummary {
    std::size_t runs = 0;
    std::array<double, 4> median{};  // dE_ice_f, dE_ice_r, dE_aero, dE_tot
    std::array<double, 4> mean{};
};

LossSummary summarize_losses(const std::vector<const RunEvaluation*>& runs);

struct EvaluationReport {
    std::vector<RunEvaluation> runs;
    std::map<std::string, DriverAngles> driver_angles;
    std::map<std::string, LossSummary> per_driver;
    std::map<std::string, LossSummary> per_track;
};

EvaluationReport build_report(std::vector<RunEvaluation> runs, const std::vector<LabelledTrace>& traces);
std::string report_json(const EvaluationReport& report, int indent = 2);
std::string losses_csv(const EvaluationReport& report);
std::string angles_csv(const EvaluationReport& report);

}  // namespace bobsled::evaluation
