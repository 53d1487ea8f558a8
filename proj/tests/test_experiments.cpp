#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "botda/errors.hpp"
#include "botda/experiments.hpp"
#include "botda/svg_plot.hpp"

using namespace botda;
namespace fs = std::filesystem;

namespace {

ResolutionPoint point(double length, double snr, double baseline) {
  ResolutionPoint p;
  p.hotspot_length_m = length;
  p.snr_db = snr;
  p.baseline_snr_db = baseline;
  p.status = MuSearchStatus::Converged;
  return p;
}

RatePoint rate(double hz, double degradation) {
  RatePoint p;
  p.sample_rate_hz = hz;
  p.evaluation.degradation_hz = degradation;
  return p;
}

}  // namespace

TEST_CASE("steady-state deviation respects the analytic bound") {
  const double bound = 2.0 * std::exp(-std::numbers::pi * 27e6 * 40e-9);
  CHECK(bound == doctest::Approx(0.0672).epsilon(1e-3));
  CHECK(steady_state_max_deviation(27e6, 60e6, 40e-9, 200e-9) <= bound * (1 + 1e-12));
  CHECK(steady_state_max_deviation(27e6, 60e6, 10e-9, 200e-9) > bound);
}

TEST_CASE("unknown figure ids list the valid ones") {
  try {
    reproduce_figure("fig9", {});
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("fig6b") != std::string::npos);
  }
  CHECK(figure_ids().size() == 7);
  CHECK_THROWS_AS(builtin_scenario("nope"), ConfigError);
}

TEST_CASE("SNR/resolution gate") {
  const std::vector<ResolutionPoint> t01{point(0.5, 20.0, 19.0), point(1.0, 25.0, 20.0), point(1.5, 30.0, 21.5)};
  const std::vector<ResolutionPoint> t05{point(0.5, 26.0, 19.0), point(1.0, 31.0, 20.0), point(1.5, 37.0, 21.5)};
  CHECK(gate_snr_resolution(t01, t05).pass);
  auto bad = t01;
  bad[1].snr_db = 18.0;  // improvement no longer monotone
  CHECK_FALSE(gate_snr_resolution(bad, t05).pass);
  auto off = t05;
  off[2].snr_db = 30.0;  // 8.5 dB, far from 16.39
  CHECK_FALSE(gate_snr_resolution(t01, off).pass);
}

TEST_CASE("sampling-rate gate") {
  const std::vector<RatePoint> good{rate(0.5e9, 2.0e6), rate(1e9, 0.6e6), rate(2e9, 0.25e6), rate(5e9, 0.04e6)};
  CHECK(gate_sampling_rate(good).pass);
  auto flat = good;
  flat[3].evaluation.degradation_hz = 0.3e6;
  CHECK_FALSE(gate_sampling_rate(flat).pass);
  auto far = good;
  far[0].evaluation.degradation_hz = 4.0e6;
  CHECK_FALSE(gate_sampling_rate(far).pass);
}

TEST_CASE("distortion gates") {
  DistortionCase single;
  single.pre_hotspot_error_hz = 4.5e6;
  single.hotspot_max_error_hz = {1e6, 8e6, 12e6};
  CHECK(gate_distortion_reproduced(single).pass);
  single.hotspot_max_error_hz[2] = 3e6;
  CHECK_FALSE(gate_distortion_reproduced(single).pass);

  DistortionCase pair;
  pair.pre_hotspot_error_hz = 0.1e6;
  pair.degradations_hz = {0.05e6, -0.2e6, 0.3e6};
  pair.fwhm_min_hz = 27e6;
  pair.fwhm_max_hz = 28e6;
  CHECK(gate_distortion_eliminated(pair).pass);
  CHECK(gate_lorentzian_width(pair).pass);
  pair.degradations_hz[1] = 0.6e6;
  pair.fwhm_max_hz = 31e6;
  CHECK_FALSE(gate_distortion_eliminated(pair).pass);
  CHECK_FALSE(gate_lorentzian_width(pair).pass);
}

TEST_CASE("fig1 writes CSV and SVG artifacts with provenance") {
  ExperimentOptions o;
  o.out_dir = fs::temp_directory_path() / "botda_tests" / "fig1";
  fs::remove_all(o.out_dir);
  const ExperimentReport r = reproduce_figure("fig1", o);
  CHECK(r.gates.empty());
  CHECK(r.passed());
  REQUIRE_FALSE(r.artifacts.empty());
  bool csv = false, svg = false;
  for (const fs::path& p : r.artifacts) {
    CHECK(fs::exists(p));
    csv = csv || p.extension() == ".csv";
    svg = svg || p.extension() == ".svg";
  }
  CHECK(csv);
  CHECK(svg);
  CHECK(r.provenance_hash.size() == 16);
}

TEST_CASE("SVG plots") {
  LinePlot plot{"t", "x", "y", {{"a", {0, 1, 2}, {1, 4, 9}, false}, {"b", {0, 1}, {2, 2}, true}}};
  const std::string s = render_svg(plot);
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("polyline") != std::string::npos);
  CHECK(s.find("circle") != std::string::npos);
  plot.series[0].y.pop_back();
  CHECK_THROWS_AS(render_svg(plot), ContractError);
  const HeatMap h{"h", "x", "y", {0, 1}, {0, 1, 2}, {{0, 1}, {1, 2}, {2, 3}}};
  CHECK(render_svg(h).find("<rect") != std::string::npos);
}
