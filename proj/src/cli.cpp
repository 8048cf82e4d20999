#include "bobsled/cli.hpp"

#include "bobsled/common.hpp"
#include "bobsled/evaluation.hpp"
#include "bobsled/fitting.hpp"
#include "bobsled/icehouse.hpp"
#include "bobsled/kvtext.hpp"
#include "bobsled/onetrack.hpp"
#include "bobsled/sim.hpp"
#include "bobsled/telemetry.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace bobsled::cli {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const DataError*>(&e)) return kDataError;
    if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
    if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return kUsage;
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return kUsage;
    return kUsage;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

struct GlobalOptions {
    std::string config;
    std::string schema;
    std::string out_dir = ".";
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<double> cutoff;
    std::optional<double> rate;
    std::optional<double> roll_threshold;
    std::optional<double> window;
    std::optional<std::string> holdout;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string hex64(std::uint64_t v) {
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << v;
    return o.str();
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    return s;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (unsigned char c : s) out.push_back(std::isalnum(c) ? static_cast<char>(c) : '_');
    return out.empty() ? std::string("unnamed") : out;
}

// Everything a command reads or writes, so inputs are validated and hashed before any output exists.
class Context {
public:
    Context(GlobalOptions opts, std::string command) : opts_(std::move(opts)), command_(std::move(command)) {
        if (opts_.jobs < 1) throw ConfigError("--jobs must be >= 1");
        if (!opts_.config.empty()) {
            const fs::path p(opts_.config);
            if (!fs::exists(p)) throw ConfigError("config file not found: " + p.string());
            config_ = kv::Document::parse(hashed(p), p.string());
            config_dir_ = p.parent_path();
        }
    }

    const GlobalOptions& opts() const { return opts_; }
    const kv::Document& config() const { return config_; }

    // File path from [files] of the config, overridable by BOBSLED_FILES_<KEY>.
    std::optional<fs::path> file(const std::string& key) const {
        if (const char* env = std::getenv(("BOBSLED_FILES_" + upper(key)).c_str()); env && *env) {
            return require_exists(fs::path(env), key);
        }
        if (auto v = config_.get("files." + key)) {
            fs::path p(*v);
            if (p.is_relative()) p = config_dir_ / p;
            return require_exists(p, key);
        }
        return std::nullopt;
    }

    std::string hashed(const fs::path& path) {
        std::string bytes = read_file(path);
        inputs_.emplace_back(path.string(), fnv1a64(bytes));
        return bytes;
    }

    void param(const std::string& key, const std::string& value) { params_[key] = value; }
    void param(const std::string& key, double value) { params_[key] = kv::format_double(value); }

    std::string header(const std::string& prefix = "# ") const {
        std::ostringstream o;
        o << prefix << "tool = bobsled " << BOBSLED_VERSION << '\n';
        o << prefix << "command = " << command_ << '\n';
        for (std::size_t i = 0; i < inputs_.size(); ++i) {
            o << prefix << "input." << i << " = " << inputs_[i].first << " fnv1a64:" << hex64(inputs_[i].second)
              << '\n';
        }
        for (const auto& [k, v] : params_) o << prefix << "param." << k << " = " << v << '\n';
        return o.str();
    }

    nlohmann::json header_json() const {
        nlohmann::json j;
        j["tool"] = std::string("bobsled ") + BOBSLED_VERSION;
        j["command"] = command_;
        j["inputs"] = nlohmann::json::array();
        for (const auto& [path, h] : inputs_) j["inputs"].push_back({{"path", path}, {"fnv1a64", hex64(h)}});
        j["params"] = params_;
        return j;
    }

    void emit(const std::string& name, std::string content) { outputs_.emplace_back(name, std::move(content)); }

    void commit(std::ostream& out) const {
        const fs::path dir(opts_.out_dir);
        fs::create_directories(dir);
        for (const auto& [name, content] : outputs_) {
            const fs::path p = dir / name;
            std::ofstream f(p, std::ios::binary);
            if (!f) throw ConfigError("cannot write " + p.string());
            f << content;
            out << "wrote " << p.string() << '\n';
        }
    }

    telemetry::CsvSchema schema() {
        std::optional<fs::path> p;
        if (!opts_.schema.empty()) {
            p = require_exists(fs::path(opts_.schema), "schema");
        } else {
            p = file("schema");
        }
        if (!p) return telemetry::CsvSchema::defaults();
        return telemetry::CsvSchema::from_document(kv::Document::parse(hashed(*p), p->string()));
    }

    onetrack::BobParameters bob() {
        if (auto p = file("bob")) return onetrack::BobParameters::from_document(kv::Document::parse(hashed(*p), p->string()));
        return onetrack::BobParameters::from_document(config_);
    }

    aero::AeroModel aero(const onetrack::BobParameters& bob) const {
        aero::AeroModel m;
        m.CxAx = config_.number_or("aero.CxAx", bob.CxAx);
        m.yaw_sensitivity = config_.number_or("aero.yaw_sensitivity", m.yaw_sensitivity);
        m.air.p_air = config_.number_or("aero.p_air", m.air.p_air);
        m.air.T = config_.number_or("aero.T", m.air.T);
        m.air.R = config_.number_or("aero.R", m.air.R);
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[aero]: ") + e.what());
        }
        return m;
    }

    friction::LongitudinalModel front_longitudinal() {
        friction::LongitudinalModel m;
        m.fixed_mu = config_.number_or("friction.mu_x", friction::kDefaultMuX);
        const auto params = file("longitudinal");
        const auto table = file("pressure_table");
        if (params.has_value() != table.has_value()) {
            throw ConfigError("files.longitudinal and files.pressure_table must be given together");
        }
        if (params) {
            m.params = friction::longitudinal_from(kv::Document::parse(hashed(*params), params->string()));
            m.pressure = friction::PressureLookup::parse(hashed(*table), table->string());
        }
        param("friction.front_model", m.pressure_based() ? "pressure" : "fixed");
        return m;
    }

    friction::LongitudinalModel rear_longitudinal() const {
        friction::LongitudinalModel m;
        m.fixed_mu = config_.number_or("friction.rear_mu_x", friction::kDefaultMuX);
        return m;
    }

    std::optional<friction::LateralFrictionParams> lateral(const std::string& key, const std::string& override_path) {
        std::optional<fs::path> p;
        if (!override_path.empty()) {
            p = require_exists(fs::path(override_path), key);
        } else {
            p = file(key);
        }
        if (!p) return std::nullopt;
        return friction::lateral_from(kv::Document::parse(hashed(*p), p->string()));
    }

    telemetry::ProcessingOptions processing() {
        telemetry::ProcessingOptions o;
        o.rate_hz = opts_.rate.value_or(config_.number_or("processing.rate", o.rate_hz));
        auto optional_hz = [&](const std::string& key, std::optional<double> fallback) -> std::optional<double> {
            if (auto v = config_.get(key)) {
                if (*v == "none" || *v == "off") return std::nullopt;
                return config_.number(key);
            }
            return fallback;
        };
        o.pre_cutoff_hz = optional_hz("processing.pre_cutoff", o.pre_cutoff_hz);
        o.cutoff_hz = opts_.cutoff ? opts_.cutoff : optional_hz("processing.cutoff", o.cutoff_hz);
        if (!(o.rate_hz > 0.0)) throw ConfigError("processing rate must be > 0");
        if (o.cutoff_hz && !(*o.cutoff_hz > 0.0)) throw ConfigError("cutoff must be > 0");
        param("processing.rate", o.rate_hz);
        param("processing.cutoff", o.cutoff_hz ? kv::format_double(*o.cutoff_hz) : "none");
        param("processing.pre_cutoff", o.pre_cutoff_hz ? kv::format_double(*o.pre_cutoff_hz) : "none");
        return o;
    }

    double roll_threshold() {
        const double r = opts_.roll_threshold.value_or(config_.number_or("processing.roll_threshold", 100.0));
        if (!(r > 0.0)) throw ConfigError("roll threshold must be > 0");
        param("processing.roll_threshold", r);
        return r;
    }

    double window() {
        const double w = opts_.window.value_or(config_.number_or("processing.window", 0.6));
        if (!(w > 0.0 && w <= 1.0)) throw ConfigError("window fraction must lie in (0, 1]");
        param("processing.window", w);
        return w;
    }

private:
    static fs::path require_exists(const fs::path& p, const std::string& key) {
        if (!fs::exists(p)) throw ConfigError("file for '" + key + "' not found: " + p.string());
        return p;
    }

    GlobalOptions opts_;
    std::string command_;
    kv::Document config_;
    fs::path config_dir_;
    std::vector<std::pair<std::string, std::uint64_t>> inputs_;
    std::map<std::string, std::string> params_;
    std::vector<std::pair<std::string, std::string>> outputs_;
};

// Runs f(i) for i in [0, n) on up to `jobs` threads; results keep input order and the
// first failure (by index) is rethrown.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, int jobs, F f) {
    std::vector<std::optional<T>> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                results[i] = f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = static_cast<std::size_t>(std::max(1, std::min<int>(jobs, static_cast<int>(n))));
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<T> out;
    out.reserve(n);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

struct LoadedRun {
    std::string name;
    telemetry::TelemetryRun run;
    onetrack::AxleForceTrace trace;
};

std::vector<LoadedRun> load_runs(Context& ctx, const std::vector<std::string>& files, const onetrack::BobParameters& bob,
                                 const friction::LongitudinalModel& front, const aero::AeroModel& aero,
                                 bool side_force) {
    if (files.empty()) throw ConfigError("no telemetry files given");
    const auto schema = ctx.schema();
    const auto processing = ctx.processing();
    std::vector<std::string> texts;
    for (const auto& f : files) texts.push_back(ctx.hashed(f));
    onetrack::ReconstructionOptions ro;
    ro.roll_threshold_deg_s2.reset();
    ro.aero_side_force = side_force;
    return parallel_map<LoadedRun>(files.size(), ctx.opts().jobs, [&](std::size_t i) {
        LoadedRun r;
        r.name = fs::path(files[i]).stem().string();
        auto raw = telemetry::parse_csv(texts[i], schema, files[i]);
        r.run = telemetry::process(raw, processing);
        r.trace = onetrack::build_axle_trace(r.run, bob, front, aero, ro);
        return r;
    });
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& cell : kv::split(text, ',')) out.push_back(kv::parse_double(kv::trim(cell), what));
    return out;
}

// ---- icehouse ----

struct IcehouseArgs {
    std::vector<std::string> files;
    std::string points;
    double E_x = 0.007;
};

void cmd_icehouse(Context& ctx, const IcehouseArgs& a) {
    if (a.files.empty() && a.points.empty()) {
        throw ConfigError("icehouse needs glide-run files and/or --points");
    }
    const double window = ctx.window();
    kv::Document report;
    struct Group {
        std::vector<double> up, down, up_se, down_se;
        std::optional<double> pressure;
    };
    std::map<std::string, Group> groups;
    for (std::size_t i = 0; i < a.files.size(); ++i) {
        const auto& file = a.files[i];
        auto run = icehouse::GlideRun::parse(ctx.hashed(file), file);
        if (!run.direction) throw DataError(file + ": glide run has no direction tag (# direction = up|down)");
        const auto est = icehouse::estimate_friction(run, window);
        const std::string sec = "run_" + std::to_string(i + 1);
        const std::string specimen = run.specimen.empty() ? fs::path(file).stem().string() : run.specimen;
        report.set(sec + ".file", file);
        report.set(sec + ".specimen", specimen);
        report.set(sec + ".direction", *run.direction == icehouse::Direction::Up ? "up" : "down");
        report.set_number(sec + ".F_ice", est.fit.F_ice);
        report.set_number(sec + ".F_ice_std_error", est.fit.std_error);
        report.set_number(sec + ".mu", est.mu);
        report.set_number(sec + ".mu_std_error", est.mu_std_error);
        report.set_number(sec + ".window_s0", est.fit.window.s0);
        report.set_number(sec + ".window_s1", est.fit.window.s1);
        report.set_number(sec + ".samples", static_cast<double>(est.fit.n));
        auto& g = groups[specimen];
        if (*run.direction == icehouse::Direction::Up) {
            g.up.push_back(est.mu);
            g.up_se.push_back(est.mu_std_error);
        } else {
            g.down.push_back(est.mu);
            g.down_se.push_back(est.mu_std_error);
        }
        if (run.pressure) g.pressure = run.pressure;
        std::ostringstream res;
        res << ctx.header() << "s,residual_J\n";
        for (std::size_t k = 0; k < est.fit.s.size(); ++k) {
            res << kv::format_double(est.fit.s[k]) << ',' << kv::format_double(est.fit.residuals[k]) << '\n';
        }
        ctx.emit("icehouse_residuals_" + std::to_string(i + 1) + ".csv", res.str());
    }
    std::vector<icehouse::PressurePoint> points;
    for (const auto& [specimen, g] : groups) {
        if (g.up.empty() || g.down.empty()) {
            throw DataError("specimen '" + specimen + "' needs runs in both directions");
        }
        auto mean = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
        };
        auto mean_se = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x * x;
            return std::sqrt(s) / static_cast<double>(v.size());
        };
        const double mu = icehouse::average_bidirectional(mean(g.up), mean(g.down));
        const double se = 0.5 * std::hypot(mean_se(g.up_se), mean_se(g.down_se));
        const std::string sec = "specimen_" + sanitize(specimen);
        report.set(sec + ".name", specimen);
        report.set_number(sec + ".mu", mu);
        report.set_number(sec + ".mu_std_error", se);
        if (g.pressure) {
            report.set_number(sec + ".pressure", *g.pressure);
            points.push_back({*g.pressure, mu});
        }
    }
    if (!a.points.empty()) {
        auto extra = icehouse::parse_pressure_points(ctx.hashed(a.points), a.points);
        points.insert(points.end(), extra.begin(), extra.end());
    }
    if (!points.empty()) {
        const auto fit = icehouse::fit_quadratic_mu_p(points, a.E_x);
        friction::write_longitudinal(report, fit);
        report.set_number("longitudinal.vertex_pressure", fit.C_x / (2.0 * fit.B_x));
        report.set_number("longitudinal.points", static_cast<double>(points.size()));
        kv::Document params;
        friction::write_longitudinal(params, fit);
        ctx.emit("longitudinal.params", ctx.header() + params.to_string());
    }
    ctx.emit("icehouse_report.txt", ctx.header() + report.to_string());
}

// ---- fit ----

struct FitArgs {
    std::vector<std::string> files;
};

fitting::FitConfig fit_config(Context& ctx) {
    fitting::FitConfig c;
    const auto& d = ctx.config();
    c.E_y = d.number_or("fit.E_y", c.E_y);
    c.max_iterations = static_cast<int>(d.number_or("fit.max_iterations", c.max_iterations));
    c.tolerance = d.number_or("fit.tolerance", c.tolerance);
    c.roll_threshold_deg_s2 = ctx.roll_threshold();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[fit]: ") + e.what());
    }
    return c;
}

void cmd_fit(Context& ctx, const FitArgs& a) {
    const auto bob = ctx.bob();
    const auto aero = ctx.aero(bob);
    const auto front = ctx.front_longitudinal();
    const bool side_force = ctx.config().number_or("aero.side_force", 0.0) != 0.0;
    const auto config = fit_config(ctx);
    const auto edges = parse_list(ctx.config().get("fit.fz_bins").value_or("0,2000,5000,10000,20000,50000"),
                                  "fit.fz_bins");
    const auto runs = load_runs(ctx, a.files, bob, front, aero, side_force);
    const auto holdout = ctx.opts().holdout;
    if (holdout) ctx.param("holdout", *holdout);

    fitting::Dataset data_f, data_r;
    std::vector<const LoadedRun*> validation;
    std::size_t training_runs = 0;
    for (const auto& r : runs) {
        if (holdout && r.run.meta.track_id == *holdout) {
            validation.push_back(&r);
            continue;
        }
        ++training_runs;
        for (auto [runner, data] : {std::pair{fitting::Runner::Front, &data_f}, std::pair{fitting::Runner::Rear, &data_r}}) {
            try {
                auto d = fitting::select_fit_samples(r.trace, r.run, config, runner);
                data->insert(data->end(), d.begin(), d.end());
            } catch (const DataError&) {
                // a run without usable samples contributes nothing
            }
        }
    }
    if (training_runs == 0) throw DataError("no training runs left after the holdout split");
    if (holdout && validation.empty()) throw DataError("no runs tagged with holdout track '" + *holdout + "'");
    if (data_f.empty() || data_r.empty()) throw DataError("no samples left for fitting");

    const auto fit_f = fitting::fit_lateral(data_f, config);
    const auto fit_r = fitting::fit_lateral(data_r, config);

    for (auto [name, fit, data] : {std::tuple{"front", &fit_f, &data_f}, std::tuple{"rear", &fit_r, &data_r}}) {
        kv::Document doc;
        fitting::write_fit_result(doc, *fit);
        ctx.emit(std::string(name) + ".fit", ctx.header() + doc.to_string());
        ctx.emit(std::string("fit_report_") + name + ".csv",
                 ctx.header() + fitting::fit_report_csv(fitting::fit_report(*fit, *data, edges)));
    }

    if (holdout) {
        evaluation::RunnerModels models;
        models.front_longitudinal = front;
        models.rear_longitudinal = ctx.rear_longitudinal();
        models.front_lateral = fit_f.params;
        models.rear_lateral = fit_r.params;
        models.aero = aero;
        kv::Document v;
        for (const auto* r : validation) {
            const auto measured = evaluation::measured_lateral_force(r->trace, bob);
            const auto mask = evaluation::valid_mask(r->trace);
            const double fitted = evaluation::validate_rmse(
                evaluation::predicted_lateral_force(r->trace, models, evaluation::LateralLaw::Fitted), measured, mask);
            const double braghin = evaluation::validate_rmse(
                evaluation::predicted_lateral_force(r->trace, models, evaluation::LateralLaw::Braghin), measured, mask);
            const std::string sec = "run_" + sanitize(r->name);
            v.set(sec + ".track", r->run.meta.track_id);
            v.set_number(sec + ".rmse_fitted", fitted);
            v.set_number(sec + ".rmse_braghin", braghin);
        }
        ctx.emit("validation.txt", ctx.header() + v.to_string());
    }
}

// ---- eval ----

struct EvalArgs {
    std::vector<std::string> files;
    std::string front;
    std::string rear;
};

void cmd_eval(Context& ctx, const EvalArgs& a) {
    const auto bob = ctx.bob();
    evaluation::RunnerModels models;
    models.aero = ctx.aero(bob);
    models.front_longitudinal = ctx.front_longitudinal();
    models.rear_longitudinal = ctx.rear_longitudinal();
    const auto front = ctx.lateral("lateral_front", a.front);
    const auto rear = ctx.lateral("lateral_rear", a.rear);
    if (!front || !rear) {
        throw ConfigError("eval needs fitted lateral parameters (--front/--rear or files.lateral_front/rear)");
    }
    models.front_lateral = *front;
    models.rear_lateral = *rear;
    const bool side_force = ctx.config().number_or("aero.side_force", 0.0) != 0.0;
    evaluation::Window window;
    window.s0 = ctx.config().number_or("eval.s0", window.s0);
    window.s1 = ctx.config().number_or("eval.s1", window.s1);
    const auto runs = load_runs(ctx, a.files, bob, models.front_longitudinal, models.aero, side_force);

    auto evals = parallel_map<evaluation::RunEvaluation>(runs.size(), ctx.opts().jobs, [&](std::size_t i) {
        const auto& r = runs[i];
        evaluation::RunEvaluation e;
        e.name = r.name;
        e.driver = r.run.meta.driver_id.empty() ? "unknown" : r.run.meta.driver_id;
        e.track = r.run.meta.track_id.empty() ? "unknown" : r.run.meta.track_id;
        e.segments = evaluation::loss_energies(r.trace, models, window);
        e.total = evaluation::combine(e.segments);
        const auto measured = evaluation::measured_lateral_force(r.trace, bob);
        const auto mask = evaluation::valid_mask(r.trace);
        e.rmse_fitted = evaluation::validate_rmse(
            evaluation::predicted_lateral_force(r.trace, models, evaluation::LateralLaw::Fitted), measured, mask);
        e.rmse_braghin = evaluation::validate_rmse(
            evaluation::predicted_lateral_force(r.trace, models, evaluation::LateralLaw::Braghin), measured, mask);
        return e;
    });
    std::vector<evaluation::LabelledTrace> traces;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        traces.push_back({evals[i].driver, evals[i].track, &runs[i].trace});
    }
    const auto report = evaluation::build_report(std::move(evals), traces);
    auto json = nlohmann::json::parse(evaluation::report_json(report));
    json["provenance"] = ctx.header_json();
    ctx.emit("evaluation.json", json.dump(2) + "\n");
    ctx.emit("losses.csv", ctx.header() + evaluation::losses_csv(report));
    ctx.emit("angles.csv", ctx.header() + evaluation::angles_csv(report));
}

// ---- simulate ----

struct SimulateArgs {
    std::string scenario;
};

void cmd_simulate(Context& ctx, const SimulateArgs& a) {
    if (!fs::exists(a.scenario)) throw ConfigError("scenario file not found: " + a.scenario);
    auto file = sim::scenario_from(kv::Document::parse(ctx.hashed(a.scenario), a.scenario));
    if (ctx.opts().seed) file.scenario.noise.seed = *ctx.opts().seed;
    ctx.param("seed", static_cast<double>(file.scenario.noise.seed));
    const auto schema = ctx.schema();
    const auto result = sim::simulate(file.scenario, file.models);
    const auto syn = sim::export_synthetic_telemetry(result, file.scenario, file.models);
    const std::string base = sanitize(file.scenario.name);
    ctx.emit(base + "_telemetry.csv", ctx.header() + telemetry::to_csv(syn.run, schema));
    ctx.emit(base + "_truth.csv", ctx.header() + onetrack::trace_to_csv(syn.truth));
    kv::Document summary;
    const auto& f = result.final_state;
    summary.set("result.stop_reason", result.reason == sim::StopReason::TrackEnd  ? "track_end"
                                      : result.reason == sim::StopReason::Stopped ? "stopped"
                                                                                  : "time_limit");
    summary.set_number("result.t", f.t);
    summary.set_number("result.s", f.s);
    summary.set_number("result.v", f.v);
    summary.set_number("result.beta", f.beta);
    summary.set_number("result.psi_dot", f.psi_dot);
    summary.set_number("result.energy_dissipated", result.energy_scale);
    summary.set_number("result.energy_residual", result.energy_residual);
    summary.set_number("result.steps", static_cast<double>(result.log.size()));
    ctx.emit(base + "_summary.txt", ctx.header() + summary.to_string());
}

// ---- friction-table ----

struct TableArgs {
    double p_min = 6.0, p_max = 18.0, p_step = 0.5;
    std::vector<double> fz{2000.0, 5000.0, 10000.0};
    double alpha_max_deg = 3.0, alpha_step_deg = 0.1;
};

std::vector<double> grid(double lo, double hi, double step, const char* what) {
    if (!(step > 0.0)) throw ConfigError(std::string(what) + " step must be > 0");
    if (!(hi >= lo)) throw ConfigError(std::string(what) + " range must satisfy min <= max");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t k = 0; k <= n; ++k) out.push_back(lo + static_cast<double>(k) * step);
    return out;
}

void cmd_friction_table(Context& ctx, const TableArgs& a) {
    if (!(a.p_min > 0.0)) throw ConfigError("pressures must be > 0 MPa");
    const auto pressures = grid(a.p_min, a.p_max, a.p_step, "pressure");
    const auto alphas = grid(-a.alpha_max_deg, a.alpha_max_deg, a.alpha_step_deg, "slip angle");
    if (a.fz.empty()) throw ConfigError("--fz needs at least one normal force");
    for (double f : a.fz) {
        if (!(f > 0.0)) throw ConfigError("--fz values must be > 0");
    }
    friction::LongitudinalFrictionParams lon;
    if (auto p = ctx.file("longitudinal")) {
        lon = friction::longitudinal_from(kv::Document::parse(ctx.hashed(*p), p->string()));
    }
    const auto front = ctx.lateral("lateral_front", "").value_or(friction::LateralFrictionParams::front_reference());
    const auto rear = ctx.lateral("lateral_rear", "").value_or(friction::LateralFrictionParams::rear_reference());

    std::ostringstream mu;
    mu << ctx.header() << "p_MPa,mu_x\n";
    for (double p : pressures) mu << kv::format_double(p) << ',' << kv::format_double(friction::mu_x(p, lon)) << '\n';
    ctx.emit("mu_x_curve.csv", mu.str());

    for (auto [name, prm] : {std::pair{"front", &front}, std::pair{"rear", &rear}}) {
        std::ostringstream o;
        o << ctx.header() << "F_z,B_y,alpha_deg,F_y\n";
        for (double fz : a.fz) {
            const double b = prm->K_y / (prm->C_y * prm->mu_zeta_y * prm->zeta_tuning * fz);
            for (double al : alphas) {
                o << kv::format_double(fz) << ',' << kv::format_double(b) << ',' << kv::format_double(al) << ','
                  << kv::format_double(friction::force_y(fz, deg_to_rad(al), *prm)) << '\n';
            }
        }
        ctx.emit(std::string("lateral_") + name + ".csv", o.str());
    }
    kv::Document summary;
    friction::write_longitudinal(summary, lon);
    summary.set_number("longitudinal.vertex_pressure", lon.C_x / (2.0 * lon.B_x));
    friction::write_lateral(summary, front, "lateral_front");
    friction::write_lateral(summary, rear, "lateral_rear");
    ctx.emit("friction_table.txt", ctx.header() + summary.to_string());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bobsled ice friction and one-track dynamics toolkit", "bobsled"};
    app.set_version_flag("--version", std::string("bobsled ") + BOBSLED_VERSION);
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    std::uint64_t seed = 0;
    double cutoff = 0, rate = 0, roll = 0, window = 0;
    std::string holdout;
    app.add_option("--config", g.config, "Key/value configuration file");
    app.add_option("--schema", g.schema, "Telemetry CSV schema file");
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Parallel input files")->capture_default_str();
    auto* o_seed = app.add_option("--seed", seed, "Noise seed (simulate)");
    auto* o_cutoff = app.add_option("--cutoff", cutoff, "Low-pass cutoff [Hz]");
    auto* o_rate = app.add_option("--rate", rate, "Resampling rate [Hz]");
    auto* o_roll = app.add_option("--roll-threshold", roll, "Roll-acceleration exclusion [deg/s^2]");
    auto* o_window = app.add_option("--window", window, "Central fraction of the glide used for the energy fit");
    auto* o_holdout = app.add_option("--holdout", holdout, "Track id held out of fitting for validation");

    IcehouseArgs ice;
    auto* c_ice = app.add_subcommand("icehouse", "Longitudinal friction from glide runs");
    c_ice->add_option("files", ice.files, "Glide-run CSV files");
    c_ice->add_option("--points", ice.points, "(p, mu) CSV for the quadratic fit");
    c_ice->add_option("--E-x", ice.E_x, "Upper cap of mu_x")->capture_default_str();

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Lateral friction fit from telemetry");
    c_fit->add_option("files", fit.files, "Telemetry CSV files")->required();

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Driver evaluation report");
    c_eval->add_option("files", ev.files, "Telemetry CSV files")->required();
    c_eval->add_option("--front", ev.front, "Front lateral parameter file");
    c_eval->add_option("--rear", ev.rear, "Rear lateral parameter file");

    SimulateArgs simargs;
    auto* c_sim = app.add_subcommand("simulate", "Synthetic telemetry from a scenario");
    c_sim->add_option("scenario", simargs.scenario, "Scenario file")->required();

    TableArgs table;
    auto* c_table = app.add_subcommand("friction-table", "Plot-ready friction curves");
    c_table->add_option("--p-min", table.p_min)->capture_default_str();
    c_table->add_option("--p-max", table.p_max)->capture_default_str();
    c_table->add_option("--p-step", table.p_step)->capture_default_str();
    c_table->add_option("--fz", table.fz, "Normal forces [N]")->delimiter(',');
    c_table->add_option("--alpha-max-deg", table.alpha_max_deg)->capture_default_str();
    c_table->add_option("--alpha-step-deg", table.alpha_step_deg)->capture_default_str();

    try {
        std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
        std::reverse(rev.begin(), rev.end());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    if (*o_seed) g.seed = seed;
    if (*o_cutoff) g.cutoff = cutoff;
    if (*o_rate) g.rate = rate;
    if (*o_roll) g.roll_threshold = roll;
    if (*o_window) g.window = window;
    if (*o_holdout) g.holdout = holdout;

    try {
        const auto* sub = app.get_subcommands().front();
        Context ctx(g, sub->get_name());
        if (sub == c_ice) {
            cmd_icehouse(ctx, ice);
        } else if (sub == c_fit) {
            cmd_fit(ctx, fit);
        } else if (sub == c_eval) {
            cmd_eval(ctx, ev);
        } else if (sub == c_sim) {
            cmd_simulate(ctx, simargs);
        } else {
            cmd_friction_table(ctx, table);
        }
        ctx.commit(out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kOk;
}

}  // namespace bobsled::cli
