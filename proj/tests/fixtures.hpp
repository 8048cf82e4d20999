#pragma once

#include "bobsled/kvtext.hpp"
#include "bobsled/sim.hpp"
#include "bobsled/telemetry.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace fixture {

inline const std::filesystem::path data_dir{BOBSLED_DATA_DIR};

inline bobsled::telemetry::TelemetryRun uniform_run(
    double rate, std::size_t n, const std::function<void(bobsled::telemetry::TelemetryFrame&, double)>& fill) {
    bobsled::telemetry::TelemetryRun run;
    run.meta.sample_rate = rate;
    for (std::size_t i = 0; i < n; ++i) {
        bobsled::telemetry::TelemetryFrame f;
        f.t = static_cast<double>(i) / rate;
        f.v = 10.0;
        fill(f, f.t);
        run.frames.push_back(f);
    }
    return run;
}

inline bobsled::sim::ScenarioFile scenario(const std::string& name) {
    return bobsled::sim::scenario_from(bobsled::kv::Document::load(data_dir / "scenarios" / (name + ".kv")));
}

inline bobsled::onetrack::BobParameters bob() {
    return bobsled::onetrack::BobParameters::from_document(bobsled::kv::Document::load(data_dir / "bob.kv"));
}

}  // namespace fixture
