#pragma once

#include "bobsled/friction.hpp"
#include "bobsled/kvtext.hpp"
#include "bobsled/onetrack.hpp"
#include "bobsled/telemetry.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace bobsled::fitting {

enum class Runner { Front, Rear };

struct FitSample {
    double alpha = 0.0;  // rad
    double F_z = 0.0;    // N, > 0
    double F_y = 0.0;    // N
};

using Dataset = std::vector<FitSample>;

// Parameter order everywhere: (mu_zeta_y, C_y, K_y).
struct FitConfig {
    double E_y = 0.99;
    std::optional<std::array<double, 3>> initial;  // nullopt: (3, 0.05, small-angle slope estimate)
    std::array<double, 3> lower{0.1, 0.001, 100.0};
    std::array<double, 3> upper{20.0, 1.9, 1e6};
    std::optional<double> fixed_K_y;
    double roll_threshold_deg_s2 = 100.0;
    int max_iterations = 200;
    double tolerance = 1e-12;  // relative cost decrease of an accepted step

    void validate() const;
};

enum class FitStatus { Converged, MaxIterations };

struct FitResult {
    friction::LateralFrictionParams params;
    double rms = 0.0;  // N
    std::size_t count = 0;
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    FitStatus status = FitStatus::MaxIterations;
    int iterations = 0;
    std::vector<double> cost_history;  // 0.5 * sum of squared residuals after each accepted step
};

// Keeps samples without validity flags, with |phi_ddot| <= threshold and F_z > 0.
// The roll flag stored in the trace is ignored in favour of the configured threshold.
Dataset select_fit_samples(const onetrack::AxleForceTrace& trace, const telemetry::TelemetryRun& run,
                           const FitConfig& config, Runner runner);

// Small-angle slope: Theil-Sen line fit on the lowest-|alpha| decile.
double small_angle_slope(const Dataset& data);

// Least-squares slope of F_y over alpha through the origin, all samples.
double origin_slope(const Dataset& data);

// Bounded Levenberg-Marquardt on (ln mu_zeta_y, ln C_y, ln K_y) with an analytic Jacobian.
FitResult fit_lateral(const Dataset& data, const FitConfig& config);

// Model value and its partial derivatives with respect to (mu_zeta_y, C_y, K_y).
struct ModelEval {
    double F_y;
    std::array<double, 3> d;
};
ModelEval lateral_model(double alpha, double F_z, double mu_zeta_y, double C_y, double E_y, double K_y);

struct AlphaBin {
    double alpha_lo, alpha_hi, alpha_mid;
    std::size_t count;
    double q25, median, q75;  // measured F_y
    double model;             // model at alpha_mid and the bin's mean F_z
};

struct FzBin {
    double fz_lo, fz_hi, fz_mean;
    std::size_t count;
    std::vector<AlphaBin> alpha_bins;                 // empty alpha bins omitted
    std::vector<std::pair<double, double>> curve;    // (alpha, model F_y) at fz_mean
};

// Empty F_z bins are omitted.
std::vector<FzBin> fit_report(const FitResult& result, const Dataset& data, const std::vector<double>& fz_edges,
                              int alpha_bins = 12, int curve_points = 41);
std::string fit_report_csv(const std::vector<FzBin>& bins);

void write_fit_result(kv::Document& doc, const FitResult& result);
std::string dataset_csv(const Dataset& data);

double quantile(std::vector<double> values, double q);  // type 7 (linear between order statistics)

}  // namespace bobsled::fitting
