#pragma once

#include "bobsled/kvtext.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bobsled::telemetry {

// One time sample, SI units and radians.
struct TelemetryFrame {
    double t = 0.0;
    double a_x = 0.0, a_y = 0.0, a_z = 0.0;                 // at the sensor, specific force [m/s^2]
    double phi_dot = 0.0, theta_dot = 0.0, psi_dot = 0.0;  // body rates [rad/s]
    double v = 0.0;                                        // speed over ground, xy-plane [m/s]
    double alpha_sensor = 0.0;                             // side slip at sensor [rad]
    double delta = 0.0;                                    // steering [rad]
    double gamma = 0.0;                                    // roll-split [rad]
};

struct DerivedChannels {
    std::vector<double> phi_ddot, theta_ddot, psi_ddot;  // [rad/s^2]
    std::vector<double> s;                               // cumulative distance [m]
    std::vector<double> h;                               // altitude [m], empty when not recorded

    [[nodiscard]] bool has_rates() const { return !psi_ddot.empty(); }
};

struct RunMeta {
    std::string driver_id;
    std::string track_id;
    double sample_rate = 0.0;  // [Hz]
    std::map<std::string, std::string> extra;
};

struct TelemetryRun {
    std::vector<TelemetryFrame> frames;
    DerivedChannels derived;
    RunMeta meta;

    [[nodiscard]] std::size_t size() const { return frames.size(); }
    [[nodiscard]] bool has_altitude() const { return !derived.h.empty(); }
};

enum class AngleUnit { Radians, Degrees };

// Maps channel symbols onto CSV column names and declares the file's angle unit
// (applied to angles and to angular rates).
struct CsvSchema {
    std::map<std::string, std::string> columns;  // symbol -> column name
    AngleUnit angle_unit = AngleUnit::Radians;
    int precision = 17;  // significant digits on export

    // Identity mapping (column name == symbol), radians.
    static CsvSchema defaults();
    // [columns] symbol = column ; [units] angle = deg|rad ; [export] precision = N
    static CsvSchema from_document(const kv::Document& doc);
    static CsvSchema load(const std::filesystem::path& path);

    [[nodiscard]] std::string column(const std::string& symbol) const;
};

inline const std::array<const char*, 11> kMandatoryChannels = {
    "t", "a_x", "a_y", "a_z", "phi_dot", "theta_dot", "psi_dot", "v", "alpha", "delta", "gamma"};

TelemetryRun ingest_csv(const std::filesystem::path& path, const CsvSchema& schema);
TelemetryRun parse_csv(std::string_view text, const CsvSchema& schema, const std::string& origin = "<csv>");

std::string to_csv(const TelemetryRun& run, const CsvSchema& schema);
void export_csv(const TelemetryRun& run, const std::filesystem::path& path, const CsvSchema& schema);

// Zero-phase 2nd-order Butterworth low-pass, applied forward then backward.
TelemetryRun lowpass_filter(const TelemetryRun& run, double cutoff_hz);

// Linear interpolation onto a uniform grid starting at the first sample.
TelemetryRun resample(const TelemetryRun& run, double rate_hz);

// Angular accelerations by central differences, distance by trapezoidal integration of v.
TelemetryRun derive_channels(const TelemetryRun& run);

struct ProcessingOptions {
    double rate_hz = 100.0;
    std::optional<double> pre_cutoff_hz = 40.0;  // anti-alias before downsampling
    std::optional<double> cutoff_hz = 20.0;      // before analysis
};

// resample (with anti-alias filter if downsampling) -> low-pass -> derive.
TelemetryRun process(const TelemetryRun& run, const ProcessingOptions& options);

double estimate_sample_rate(const std::vector<TelemetryFrame>& frames);

namespace detail {

struct Biquad {
    double b0, b1, b2, a1, a2;  // a0 normalised to 1
};

Biquad butterworth_lowpass(double cutoff_hz, double sample_rate_hz);
std::vector<double> filtfilt(const Biquad& f, const std::vector<double>& x);

}  // namespace detail

}  // namespace bobsled::telemetry
