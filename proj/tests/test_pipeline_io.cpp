#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "botda/errors.hpp"
#include "botda/experiments.hpp"
#include "botda/pipeline_io.hpp"
#include "botda/simulator.hpp"

using namespace botda;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "botda_tests";
  fs::create_directories(dir);
  return dir / name;
}

BgsMap small_map() {
  ScenarioConfig c = builtin_scenario("fig3c");
  c.fiber.length_m = 12.0;
  c.fiber.hotspots = {{5.0, 1.0, 10.83}};
  c.sweep = {10.76, 4.0, 20};
  c.noise.snr_db = 20.0;
  c.noise.seed = 77;
  return simulate_bgs(c.fiber_profile(), c.pulse_scheme(), c.frequency_sweep(), c.sampling_grid(),
                      c.noise_spec());
}

std::string csv_rows(std::size_t n, double dt_ns, double jitter_at = -1) {
  std::string s = "# exported trace\ntime_ns,gain\n";
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) * dt_ns;
    if (static_cast<double>(i) == jitter_at) t += 0.3 * dt_ns;
    s += std::to_string(t) + "," + std::to_string(0.01 * static_cast<double>(i)) + "\n";
  }
  return s;
}

}  // namespace

TEST_CASE("scenario text round-trips") {
  for (const char* name : {"fig2a", "fig3c"}) {
    const ScenarioConfig c = builtin_scenario(name);
    CHECK(parse_scenario(scenario_to_string(c)) == c);
  }
  ScenarioConfig c = builtin_scenario("fig3c");
  c.noise.snr_db = 23.0;
  c.noise.convention = SnrConvention::Ratio;
  c.deconv.mode = DeconvMode::Tolerance;
  c.deconv.kernel_sampling = KernelSampling::Point;
  c.grid.sample_rate_gsps = 2.5;
  c.sweep.step_mhz = 0.1 + 0.2;
  const fs::path p = scratch("roundtrip.cfg");
  save_scenario(c, p);
  CHECK(load_scenario(p) == c);
  CHECK(scenario_to_string(load_scenario(p)) == scenario_to_string(c));
}

TEST_CASE("bundled config files match the built-in scenarios") {
  CHECK(load_scenario("configs/fig3c.cfg") == builtin_scenario("fig3c"));
  CHECK(load_scenario("configs/fig2a.cfg") == builtin_scenario("fig2a"));
}

TEST_CASE("config hash tracks content") {
  ScenarioConfig a = builtin_scenario("fig3c"), b = a;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.noise.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("unknown keys report their position") {
  const std::string text = "name: x\nfiber:\n  length_m: 40\n  colour: red\n";
  try {
    parse_scenario(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
    CHECK(e.column() == 3);
    CHECK(std::string(e.what()).find("colour") != std::string::npos);
  }
}

TEST_CASE("malformed and mistyped values are parse errors") {
  CHECK_THROWS_AS(parse_scenario("fiber: [1, 2\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("fiber:\n  length_m: long\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("pulse:\n  kind: triple\n"), ParseError);
}

TEST_CASE("a 30/10 ns pair is rejected unless overridden") {
  const std::string text = "pulse:\n  kind: pair\n  width_long_ns: 30\n  width_short_ns: 10\n";
  CHECK_THROWS_AS(parse_scenario(text), ValidationError);
  CHECK_NOTHROW(parse_scenario(text + "  allow_short_pair: true\n"));
  CHECK_THROWS_AS(parse_scenario("fiber:\n  length_m: -3\n"), ValidationError);
  CHECK_THROWS_AS(parse_scenario("output:\n  formats: [png]\n"), ValidationError);
}

TEST_CASE("BGS files round-trip bit for bit") {
  const BgsMap m = small_map();
  const fs::path p = scratch("map.bgs");
  write_bgs(p, m, "00ff00ff00ff00ff");
  const BgsMap back = read_bgs(p);
  CHECK(back == m);
  const BgsHeader h = inspect_bgs(p);
  CHECK(h.config_hash == std::optional<std::string>("00ff00ff00ff00ff"));
  CHECK(h.sweep == m.sweep);
  CHECK(h.grid == m.grid());
  CHECK(h.meta == m.meta());
  CHECK(fs::file_size(p) == h.payload_offset + h.payload_bytes());
}

TEST_CASE("truncated or damaged BGS files are corruption errors") {
  const BgsMap m = small_map();
  const fs::path p = scratch("trunc.bgs");
  write_bgs(p, m);
  fs::resize_file(p, fs::file_size(p) - 8);
  CHECK_THROWS_AS(read_bgs(p), CorruptionError);
  CHECK_THROWS_AS(inspect_bgs(p), CorruptionError);
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << "NOT-A-BGS\n";
  }
  CHECK_THROWS_AS(read_bgs(p), CorruptionError);
}

TEST_CASE("CSV time column in nanoseconds") {
  CsvSchema s;
  s.time_column = "time_ns";
  s.time_unit_s = 1e-9;
  s.probe_offset_hz = 10.8e9;
  const IngestedData d = ingest_csv(csv_rows(100, 1.0), s);
  REQUIRE(std::holds_alternative<GainTrace>(d));
  const GainTrace& t = std::get<GainTrace>(d);
  CHECK(t.grid.dt_s == doctest::Approx(1e-9).epsilon(1e-9));
  CHECK(t.grid.n_samples == 100);
  CHECK(t.probe_offset_hz == 10.8e9);
  CHECK(t.samples[10] == doctest::Approx(0.1));
}

TEST_CASE("CSV timing jitter names the offending row") {
  CsvSchema s;
  s.time_column = "time_ns";
  s.time_unit_s = 1e-9;
  try {
    ingest_csv(csv_rows(50, 1.0, 20), s);
    FAIL("expected an ingest error");
  } catch (const IngestError& e) {
    CHECK(e.row() == 21);
  }
  s.max_jitter = 0.5;
  CHECK_NOTHROW(ingest_csv(csv_rows(50, 1.0, 20), s));
  CHECK_THROWS_AS(ingest_csv("time_ns,gain\n0,1\n2,1\n1,1\n", s), IngestError);
  CHECK_THROWS_AS(ingest_csv("time_ns,gain\n0,1\n1,x\n2,1\n", s), IngestError);
}

TEST_CASE("multi-column CSV becomes a BGS map") {
  CsvSchema s;
  s.frequency_unit_hz = 1e9;
  s.time_column = "time_ns";
  s.time_unit_s = 1e-9;
  std::string text = "time_ns,10.79,10.80,10.81\n";
  for (int i = 0; i < 10; ++i) text += std::to_string(i) + ",0.5,1.0,0.5\n";
  const IngestedData d = ingest_csv(text, s);
  REQUIRE(std::holds_alternative<BgsMap>(d));
  const BgsMap& m = std::get<BgsMap>(d);
  CHECK(m.n_freqs() == 3);
  CHECK(m.sweep.start_hz == doctest::Approx(10.79e9));
  CHECK(m.sweep.step_hz == doctest::Approx(10e6));
  CHECK_NOTHROW(m.validate());
  CHECK_THROWS_AS(ingest_csv("time_ns,10.79,10.80,10.83\n0,1,1,1\n1,1,1,1\n", s), IngestError);
}

TEST_CASE("native BGS files are recognized on ingest") {
  const BgsMap m = small_map();
  const fs::path p = scratch("ingest.bgs");
  write_bgs(p, m);
  const IngestedData d = ingest_external_trace(p, CsvSchema{});
  REQUIRE(std::holds_alternative<BgsMap>(d));
  CHECK(std::get<BgsMap>(d) == m);
}

TEST_CASE("provenance comment") {
  CHECK(provenance_comment("abc", 5) == "# config_hash=abc seed=5");
  CHECK(provenance_comment("abc", std::nullopt) == "# config_hash=abc seed=none");
}
