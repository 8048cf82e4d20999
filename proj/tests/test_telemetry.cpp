#include "bobsled/common.hpp"
#include "bobsled/telemetry.hpp"

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace bobsled;
using telemetry::TelemetryFrame;
using telemetry::TelemetryRun;

namespace {

using fixture::uniform_run;

std::string three_rows_degrees() {
    return "# driver = D1\n# track = T1\n"
           "t,a_x,a_y,a_z,phi_dot,theta_dot,psi_dot,v,alpha,delta,gamma\n"
           "0,0.1,0.2,9.8,10,0,-5,20,1,2,3\n"
           "0.01,0.1,0.2,9.8,10,0,-5,20,1,2,3\n"
           "0.02,0.1,0.2,9.8,10,0,-5,20,1,2,3\n";
}

}  // namespace

TEST_SUITE("telemetry") {

TEST_CASE("ingest converts declared degrees to radians") {
    auto schema = telemetry::CsvSchema::defaults();
    schema.angle_unit = telemetry::AngleUnit::Degrees;
    const auto run = telemetry::parse_csv(three_rows_degrees(), schema);
    REQUIRE(run.size() == 3);
    CHECK(run.meta.driver_id == "D1");
    CHECK(run.meta.track_id == "T1");
    CHECK(run.frames[1].alpha_sensor == doctest::Approx(oracle::rad(1.0)).epsilon(1e-15));
    CHECK(run.frames[1].delta == doctest::Approx(oracle::rad(2.0)).epsilon(1e-15));
    CHECK(run.frames[1].gamma == doctest::Approx(oracle::rad(3.0)).epsilon(1e-15));
    CHECK(run.frames[1].phi_dot == doctest::Approx(oracle::rad(10.0)).epsilon(1e-15));
    CHECK(run.frames[1].a_z == 9.8);
    CHECK_FALSE(run.has_altitude());
}

TEST_CASE("schema renames columns") {
    const auto doc = kv::Document::parse("[columns]\nv = speed_mps\n[units]\nangle = rad\n");
    const auto schema = telemetry::CsvSchema::from_document(doc);
    std::string text = three_rows_degrees();
    text.replace(text.find(",v,"), 3, ",speed_mps,");
    CHECK(telemetry::parse_csv(text, schema).frames[0].v == 20.0);
    CHECK_THROWS_AS(telemetry::parse_csv(three_rows_degrees(), schema), DataError);
}

TEST_CASE("non-monotonic time names the offending line") {
    std::string text = three_rows_degrees();
    text.replace(text.rfind("0.02,"), 5, "0.005,");
    try {
        (void)telemetry::parse_csv(text, telemetry::CsvSchema::defaults(), "run.csv");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("run.csv:6") != std::string::npos);
    }
}

TEST_CASE("missing column and unparsable cell are data errors") {
    std::string text = three_rows_degrees();
    text.replace(text.find(",gamma"), 6, "");
    CHECK_THROWS_AS(telemetry::parse_csv(text, telemetry::CsvSchema::defaults()), DataError);
    std::string bad = three_rows_degrees();
    bad.replace(bad.find("0.1,0.2"), 3, "abc");
    CHECK_THROWS_AS(telemetry::parse_csv(bad, telemetry::CsvSchema::defaults()), DataError);
}

TEST_CASE("500 Hz input keeps its native rate until resampled") {
    const auto run = uniform_run(500.0, 1001, [](TelemetryFrame& f, double t) { f.a_x = t; });
    std::ostringstream csv;
    csv << telemetry::to_csv(run, telemetry::CsvSchema::defaults());
    const auto in = telemetry::parse_csv(csv.str(), telemetry::CsvSchema::defaults());
    CHECK(in.size() == 1001);
    CHECK(in.meta.sample_rate == doctest::Approx(500.0));
    const auto down = telemetry::resample(in, 100.0);
    CHECK(down.size() >= 200);
    CHECK(down.size() <= 202);
}

TEST_CASE("resample is exact on affine channels and the identity at the native rate") {
    const auto run = uniform_run(500.0, 501, [](TelemetryFrame& f, double t) { f.a_y = 3.0 * t - 1.0; });
    const auto down = telemetry::resample(run, 100.0);
    for (const auto& f : down.frames) CHECK(f.a_y == doctest::Approx(3.0 * f.t - 1.0).epsilon(1e-12));
    const auto same = telemetry::resample(down, 100.0);
    REQUIRE(same.size() == down.size());
    for (std::size_t i = 0; i < same.size(); ++i) CHECK(same.frames[i].t == down.frames[i].t);
    CHECK_THROWS_AS(telemetry::resample(down, 200.0), std::invalid_argument);
}

TEST_CASE("low-pass: DC invariance, passband amplitude, variance reduction, Nyquist guard") {
    const double fs = 100.0, fc = 20.0;
    const auto constant = uniform_run(fs, 300, [](TelemetryFrame& f, double) { f.a_x = 4.2; });
    for (const auto& f : telemetry::lowpass_filter(constant, fc).frames) CHECK(f.a_x == doctest::Approx(4.2).epsilon(1e-12));

    const double f0 = fc / 10.0;
    const auto sine = uniform_run(fs, 2000, [&](TelemetryFrame& f, double t) { f.a_x = std::sin(2 * std::numbers::pi * f0 * t); });
    const auto out = telemetry::lowpass_filter(sine, fc);
    // amplitude from a least-squares sine/cosine fit on the interior
    double ss = 0, sc = 0, cc = 0, ys = 0, yc = 0;
    for (std::size_t i = 200; i < 1800; ++i) {
        const double t = out.frames[i].t, s = std::sin(2 * std::numbers::pi * f0 * t), c = std::cos(2 * std::numbers::pi * f0 * t);
        ss += s * s, sc += s * c, cc += c * c, ys += out.frames[i].a_x * s, yc += out.frames[i].a_x * c;
    }
    const double det = ss * cc - sc * sc;
    const double A = (ys * cc - yc * sc) / det, B = (yc * ss - ys * sc) / det;
    CHECK(std::hypot(A, B) == doctest::Approx(1.0).epsilon(0.01));

    std::mt19937 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto noise = uniform_run(fs, 4000, [&](TelemetryFrame& f, double) { f.a_y = n(rng); });
    const auto filtered = telemetry::lowpass_filter(noise, fc);
    double vin = 0, vout = 0;
    for (std::size_t i = 0; i < noise.size(); ++i) {
        vin += noise.frames[i].a_y * noise.frames[i].a_y;
        vout += filtered.frames[i].a_y * filtered.frames[i].a_y;
    }
    CHECK(vout < vin);
    CHECK_THROWS_AS(telemetry::lowpass_filter(constant, 50.0), std::invalid_argument);
}

TEST_CASE("filter then resample keeps a constant signal constant") {
    const auto run = uniform_run(500.0, 1500, [](TelemetryFrame& f, double) { f.psi_dot = -0.3; });
    telemetry::ProcessingOptions opt;
    const auto out = telemetry::process(run, opt);
    for (const auto& f : out.frames) CHECK(f.psi_dot == doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("derived channels") {
    const auto constant = uniform_run(100.0, 1001, [](TelemetryFrame& f, double) { f.psi_dot = 0.5; });
    const auto d = telemetry::derive_channels(constant);
    for (double x : d.derived.psi_ddot) CHECK(x == doctest::Approx(0.0).scale(1.0));
    CHECK(d.derived.s.front() == 0.0);
    CHECK(d.derived.s.back() == doctest::Approx(100.0).epsilon(1e-12));

    const auto ramp = uniform_run(100.0, 50, [](TelemetryFrame& f, double t) { f.psi_dot = 0.7 * t; });
    const auto r = telemetry::derive_channels(ramp);
    for (std::size_t i = 1; i + 1 < r.size(); ++i) CHECK(r.derived.psi_ddot[i] == doctest::Approx(0.7).epsilon(1e-9));

    CHECK_THROWS_AS(telemetry::derive_channels(uniform_run(100.0, 2, [](TelemetryFrame&, double) {})), DataError);
}

TEST_CASE("distance scales with speed") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(5.0, 30.0);
    auto run = uniform_run(100.0, 300, [&](TelemetryFrame& f, double) { f.v = u(rng); });
    auto scaled = run;
    for (auto& f : scaled.frames) f.v *= 2.5;
    const auto a = telemetry::derive_channels(telemetry::resample(run, 100.0));
    const auto b = telemetry::derive_channels(telemetry::resample(scaled, 100.0));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.derived.s[i] == doctest::Approx(2.5 * a.derived.s[i]).epsilon(1e-12));
}

TEST_CASE("ingest, export, ingest round trip is bit-identical") {
    std::mt19937 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    auto run = uniform_run(100.0, 100, [&](TelemetryFrame& f, double) {
        f.a_x = n(rng), f.a_y = n(rng), f.a_z = 9.81 + n(rng);
        f.phi_dot = n(rng), f.theta_dot = n(rng), f.psi_dot = n(rng);
        f.v = 20 + n(rng), f.alpha_sensor = 0.01 * n(rng), f.delta = 0.01 * n(rng), f.gamma = 0.01 * n(rng);
    });
    run.meta.driver_id = "A";
    run.meta.track_id = "B";
    for (auto unit : {telemetry::AngleUnit::Radians, telemetry::AngleUnit::Degrees}) {
        auto schema = telemetry::CsvSchema::defaults();
        schema.angle_unit = unit;
        const auto once = telemetry::parse_csv(telemetry::to_csv(run, schema), schema);
        const auto twice = telemetry::parse_csv(telemetry::to_csv(once, schema), schema);
        REQUIRE(twice.size() == run.size());
        for (std::size_t i = 0; i < run.size(); ++i) {
            CHECK(twice.frames[i].a_x == once.frames[i].a_x);
            CHECK(twice.frames[i].delta == once.frames[i].delta);
            CHECK(twice.frames[i].psi_dot == once.frames[i].psi_dot);
            if (unit == telemetry::AngleUnit::Radians) {
                CHECK(once.frames[i].alpha_sensor == run.frames[i].alpha_sensor);
                CHECK(once.frames[i].v == run.frames[i].v);
            }
        }
        CHECK(twice.meta.driver_id == "A");
    }
}

}
