#include "bobsled/telemetry.hpp"

#include "bobsled/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace bobsled::telemetry {

namespace {

using FrameField = double TelemetryFrame::*;

struct ChannelDef {
    const char* symbol;
    FrameField field;
    bool angular;
};

// every channel except t
constexpr std::array<ChannelDef, 10> kChannels = {{
    {"a_x", &TelemetryFrame::a_x, false},
    {"a_y", &TelemetryFrame::a_y, false},
    {"a_z", &TelemetryFrame::a_z, false},
    {"phi_dot", &TelemetryFrame::phi_dot, true},
    {"theta_dot", &TelemetryFrame::theta_dot, true},
    {"psi_dot", &TelemetryFrame::psi_dot, true},
    {"v", &TelemetryFrame::v, false},
    {"alpha", &TelemetryFrame::alpha_sensor, true},
    {"delta", &TelemetryFrame::delta, true},
    {"gamma", &TelemetryFrame::gamma, true},
}};

std::vector<double> gather(const std::vector<TelemetryFrame>& frames, FrameField f) {
    std::vector<double> out(frames.size());
    std::transform(frames.begin(), frames.end(), out.begin(), [f](const TelemetryFrame& fr) { return fr.*f; });
    return out;
}

void scatter(std::vector<TelemetryFrame>& frames, FrameField f, const std::vector<double>& values) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
        frames[i].*f = values[i];
    }
}

std::string format_fixed_precision(double value, int precision) {
    char buf[64];
    auto res = precision >= 17 ? std::to_chars(buf, buf + sizeof(buf), value)
                               : std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, precision);
    return std::string(buf, res.ptr);
}

// Interpolates samples (t, y) at the uniform grid; t strictly increasing.
std::vector<double> interpolate(const std::vector<double>& t, const std::vector<double>& y,
                                 const std::vector<double>& grid) {
    std::vector<double> out(grid.size());
    std::size_t j = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double tk = grid[k];
        while (j + 2 < t.size() && t[j + 1] < tk) {
            ++j;
        }
        const double w = (tk - t[j]) / (t[j + 1] - t[j]);
        out[k] = y[j] + w * (y[j + 1] - y[j]);
    }
    return out;
}

std::vector<double> differentiate(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<double> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        d[i] = (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1]);
    }
    // second-order one-sided stencils
    auto one_sided = [](double h1, double h2, double f0, double f1, double f2) {
        return -f0 * (2.0 * h1 + h2) / (h1 * (h1 + h2)) + f1 * (h1 + h2) / (h1 * h2) - f2 * h1 / (h2 * (h1 + h2));
    };
    d[0] = one_sided(t[1] - t[0], t[2] - t[1], y[0], y[1], y[2]);
    // signed spacings: the same stencil works looking backwards
    d[n - 1] = one_sided(t[n - 2] - t[n - 1], t[n - 3] - t[n - 2], y[n - 1], y[n - 2], y[n - 3]);
    return d;
}

}  // namespace

CsvSchema CsvSchema::defaults() {
    CsvSchema s;
    for (const char* sym : kMandatoryChannels) {
        s.columns[sym] = sym;
    }
    s.columns["h"] = "h";
    return s;
}

CsvSchema CsvSchema::from_document(const kv::Document& doc) {
    CsvSchema s = defaults();
    for (const char* sym : kMandatoryChannels) {
        if (auto col = doc.get(std::string("columns.") + sym)) {
            s.columns[sym] = *col;
        }
    }
    if (auto col = doc.get("columns.h")) {
        s.columns["h"] = *col;
    }
    const auto unit = doc.get("units.angle").value_or("rad");
    if (unit == "deg") {
        s.angle_unit = AngleUnit::Degrees;
    } else if (unit == "rad") {
        s.angle_unit = AngleUnit::Radians;
    } else {
        throw ConfigError(doc.origin() + ": units.angle must be 'deg' or 'rad', got '" + unit + "'");
    }
    s.precision = static_cast<int>(doc.number_or("export.precision", 17));
    if (s.precision < 1 || s.precision > 17) {
        throw ConfigError(doc.origin() + ": export.precision must be in [1, 17]");
    }
    return s;
}

CsvSchema CsvSchema::load(const std::filesystem::path& path) { return from_document(kv::Document::load(path)); }

std::string CsvSchema::column(const std::string& symbol) const {
    auto it = columns.find(symbol);
    return it == columns.end() ? symbol : it->second;
}

double estimate_sample_rate(const std::vector<TelemetryFrame>& frames) {
    if (frames.size() < 2) {
        return 0.0;
    }
    return static_cast<double>(frames.size() - 1) / (frames.back().t - frames.front().t);
}

TelemetryRun parse_csv(std::string_view text, const CsvSchema& schema, const std::string& origin) {
    TelemetryRun run;
    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        while (start < text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            std::string line(text.substr(start, end - start));
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(std::move(line));
            start = end + 1;
        }
    }

    std::size_t i = 0;
    for (; i < lines.size(); ++i) {
        auto trimmed = kv::trim(lines[i]);
        if (trimmed.empty()) continue;
        if (trimmed.front() != '#') break;
        auto body = trimmed.substr(1);
        if (auto eq = body.find('='); eq != std::string::npos) {
            auto key = kv::trim(std::string_view(body).substr(0, eq));
            auto value = kv::trim(std::string_view(body).substr(eq + 1));
            if (key == "driver") {
                run.meta.driver_id = value;
            } else if (key == "track") {
                run.meta.track_id = value;
            } else {
                run.meta.extra[key] = value;
            }
        }
    }
    if (i == lines.size()) {
        throw DataError(origin + ": no header row");
    }
    const auto header = kv::split(lines[i], ',');
    const std::size_t header_line = i + 1;
    auto find_col = [&](const std::string& symbol) -> std::optional<std::size_t> {
        auto name = schema.column(symbol);
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    std::array<std::size_t, kMandatoryChannels.size()> idx{};
    for (std::size_t k = 0; k < kMandatoryChannels.size(); ++k) {
        auto c = find_col(kMandatoryChannels[k]);
        if (!c) {
            throw DataError(origin + ":" + std::to_string(header_line) + ": missing mandatory column '" +
                            schema.column(kMandatoryChannels[k]) + "' (" + kMandatoryChannels[k] + ")");
        }
        idx[k] = *c;
    }
    const auto h_col = find_col("h");
    const double angle_scale = schema.angle_unit == AngleUnit::Degrees ? deg_to_rad(1.0) : 1.0;

    for (++i; i < lines.size(); ++i) {
        if (kv::trim(lines[i]).empty()) continue;
        const std::string where = origin + ":" + std::to_string(i + 1);
        const auto cells = kv::split(lines[i], ',');
        auto field = [&](std::size_t col) {
            if (col >= cells.size()) {
                throw DataError(where + ": row has " + std::to_string(cells.size()) + " fields, expected " +
                                std::to_string(header.size()));
            }
            return kv::parse_double(cells[col], where);
        };
        TelemetryFrame f;
        f.t = field(idx[0]);
        for (std::size_t k = 0; k < kChannels.size(); ++k) {
            double value = field(idx[k + 1]);
            if (kChannels[k].angular) value *= angle_scale;
            f.*(kChannels[k].field) = value;
        }
        if (!run.frames.empty() && !(f.t > run.frames.back().t)) {
            throw DataError(where + ": time not strictly increasing (" + kv::format_double(f.t) + " after " +
                            kv::format_double(run.frames.back().t) + ")");
        }
        if (!(f.v >= 0.0)) {
            throw DataError(where + ": negative speed");
        }
        if (!(std::abs(f.alpha_sensor) < std::numbers::pi / 2)) {
            throw DataError(where + ": |alpha| must be below 90 degrees");
        }
        run.frames.push_back(f);
        if (h_col) {
            run.derived.h.push_back(field(*h_col));
        }
    }
    if (run.frames.empty()) {
        throw DataError(origin + ": no data rows");
    }
    run.meta.sample_rate = estimate_sample_rate(run.frames);
    return run;
}

TelemetryRun ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), schema, path.string());
}

namespace {

// Degree value that ingest maps back onto the same radians, so that a second
// export/ingest cycle is exact; falls back to the plain conversion.
double degrees_for_ingest(double radians) {
    const double scale = deg_to_rad(1.0);
    const double guess = rad_to_deg(radians);
    double up = guess, down = guess;
    for (int k = 0; k < 64; ++k) {
        if (up * scale == radians) return up;
        if (down * scale == radians) return down;
        up = std::nextafter(up, std::numeric_limits<double>::infinity());
        down = std::nextafter(down, -std::numeric_limits<double>::infinity());
    }
    return guess;
}

}  // namespace

std::string to_csv(const TelemetryRun& run, const CsvSchema& schema) {
    std::ostringstream out;
    if (!run.meta.driver_id.empty()) out << "# driver = " << run.meta.driver_id << '\n';
    if (!run.meta.track_id.empty()) out << "# track = " << run.meta.track_id << '\n';
    for (const auto& [k, v] : run.meta.extra) {
        out << "# " << k << " = " << v << '\n';
    }
    out << schema.column("t");
    for (const auto& ch : kChannels) {
        out << ',' << schema.column(ch.symbol);
    }
    const bool with_h = run.has_altitude();
    if (with_h) out << ',' << schema.column("h");
    out << '\n';
    const bool degrees = schema.angle_unit == AngleUnit::Degrees;
    for (std::size_t i = 0; i < run.frames.size(); ++i) {
        const auto& f = run.frames[i];
        out << format_fixed_precision(f.t, schema.precision);
        for (const auto& ch : kChannels) {
            double value = f.*(ch.field);
            if (ch.angular && degrees) value = degrees_for_ingest(value);
            out << ',' << format_fixed_precision(value, schema.precision);
        }
        if (with_h) out << ',' << format_fixed_precision(run.derived.h[i], schema.precision);
        out << '\n';
    }
    return out.str();
}

void export_csv(const TelemetryRun& run, const std::filesystem::path& path, const CsvSchema& schema) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << to_csv(run, schema);
}

namespace detail {

Biquad butterworth_lowpass(double cutoff_hz, double sample_rate_hz) {
    // bilinear transform with pre-warping, Q = 1/sqrt(2)
    const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
    const double k2 = k * k;
    const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
    Biquad f{};
    f.b0 = k2 * norm;
    f.b1 = 2.0 * f.b0;
    f.b2 = f.b0;
    f.a1 = 2.0 * (k2 - 1.0) * norm;
    f.a2 = (1.0 - std::numbers::sqrt2 * k + k2) * norm;
    return f;
}

namespace {

void run_biquad(const Biquad& f, std::vector<double>& x) {
    // transposed direct form II, state initialised to the steady state of x[0]
    const double gain = (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);
    double z2 = (f.b2 - f.a2 * gain) * x.front();
    double z1 = (f.b1 - f.a1 * gain) * x.front() + z2;
    for (double& xi : x) {
        const double in = xi;
        const double y = f.b0 * in + z1;
        z1 = f.b1 * in - f.a1 * y + z2;
        z2 = f.b2 * in - f.a2 * y;
        xi = y;
    }
}

}  // namespace

std::vector<double> filtfilt(const Biquad& f, const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 2) {
        return x;
    }
    const std::size_t pad = std::min<std::size_t>(n - 1, 30);
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) {
        ext.push_back(2.0 * x.front() - x[i]);
    }
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) {
        ext.push_back(2.0 * x.back() - x[n - 1 - i]);
    }
    run_biquad(f, ext);
    std::reverse(ext.begin(), ext.end());
    run_biquad(f, ext);
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace detail

TelemetryRun lowpass_filter(const TelemetryRun& run, double cutoff_hz) {
    const double fs = run.meta.sample_rate;
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * fs)) {
        throw std::invalid_argument("lowpass cutoff " + kv::format_double(cutoff_hz) +
                                    " Hz must be positive and below the Nyquist frequency " +
                                    kv::format_double(0.5 * fs) + " Hz");
    }
    const auto filter = detail::butterworth_lowpass(cutoff_hz, fs);
    TelemetryRun out;
    out.meta = run.meta;
    out.frames = run.frames;
    for (const auto& ch : kChannels) {
        scatter(out.frames, ch.field, detail::filtfilt(filter, gather(run.frames, ch.field)));
    }
    if (run.has_altitude()) {
        out.derived.h = detail::filtfilt(filter, run.derived.h);
    }
    return out;
}

TelemetryRun resample(const TelemetryRun& run, double rate_hz) {
    if (run.frames.size() < 2) {
        throw DataError("resample needs at least 2 samples");
    }
    const double native = estimate_sample_rate(run.frames);
    if (!(rate_hz > 0.0) || rate_hz > native * (1.0 + 1e-9)) {
        throw std::invalid_argument("resample rate " + kv::format_double(rate_hz) +
                                    " Hz exceeds native rate " + kv::format_double(native) +
                                    " Hz (upsampling not supported)");
    }
    const double t0 = run.frames.front().t;
    const double dt = 1.0 / rate_hz;
    if (std::abs(native - rate_hz) <= 1e-9 * rate_hz) {
        bool uniform = true;
        for (std::size_t i = 0; i < run.frames.size() && uniform; ++i) {
            uniform = std::abs(run.frames[i].t - (t0 + static_cast<double>(i) * dt)) <= 1e-9 * dt;
        }
        if (uniform) {
            TelemetryRun out = run;
            out.derived = DerivedChannels{{}, {}, {}, {}, run.derived.h};
            out.meta.sample_rate = rate_hz;
            return out;
        }
    }
    const auto count =
        static_cast<std::size_t>(std::floor((run.frames.back().t - t0) * rate_hz + 1e-9)) + 1;
    std::vector<double> grid(count);
    for (std::size_t k = 0; k < count; ++k) {
        grid[k] = std::min(t0 + static_cast<double>(k) * dt, run.frames.back().t);
    }
    const auto t = gather(run.frames, &TelemetryFrame::t);
    TelemetryRun out;
    out.meta = run.meta;
    out.meta.sample_rate = rate_hz;
    out.frames.resize(count);
    scatter(out.frames, &TelemetryFrame::t, grid);
    for (const auto& ch : kChannels) {
        scatter(out.frames, ch.field, interpolate(t, gather(run.frames, ch.field), grid));
    }
    if (run.has_altitude()) {
        out.derived.h = interpolate(t, run.derived.h, grid);
    }
    return out;
}

TelemetryRun derive_channels(const TelemetryRun& run) {
    const std::size_t n = run.frames.size();
    if (n < 3) {
        throw DataError("derive_channels needs at least 3 samples, got " + std::to_string(n));
    }
    TelemetryRun out = run;
    const auto t = gather(run.frames, &TelemetryFrame::t);
    out.derived.phi_ddot = differentiate(t, gather(run.frames, &TelemetryFrame::phi_dot));
    out.derived.theta_ddot = differentiate(t, gather(run.frames, &TelemetryFrame::theta_dot));
    out.derived.psi_ddot = differentiate(t, gather(run.frames, &TelemetryFrame::psi_dot));
    out.derived.s.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) {
        out.derived.s[i] =
            out.derived.s[i - 1] + 0.5 * (run.frames[i].v + run.frames[i - 1].v) * (t[i] - t[i - 1]);
    }
    return out;
}

TelemetryRun process(const TelemetryRun& run, const ProcessingOptions& options) {
    TelemetryRun current = run;
    const double native = estimate_sample_rate(run.frames);
    if (native > options.rate_hz * (1.0 + 1e-9)) {
        if (options.pre_cutoff_hz) {
            current = lowpass_filter(current, *options.pre_cutoff_hz);
        }
    }
    current = resample(current, options.rate_hz);
    if (options.cutoff_hz) {
        current = lowpass_filter(current, *options.cutoff_hz);
    }
    return derive_channels(current);
}

}  // namespace bobsled::telemetry
