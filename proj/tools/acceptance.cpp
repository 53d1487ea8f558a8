// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every criterion passes or every failing criterion is
// listed in --expected-fail; an expected failure that starts passing is
// reported as XPASS and also fails the run so the list is kept honest.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "botda/bgs_analysis.hpp"
#include "botda/core_model.hpp"
#include "botda/dpp.hpp"
#include "botda/errors.hpp"
#include "botda/experiments.hpp"
#include "botda/parallel.hpp"
#include "botda/pipeline_io.hpp"
#include "botda/resolution.hpp"
#include "botda/simulator.hpp"
#include "botda/tv_deconv.hpp"

using namespace botda;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  int realizations = 100;
  std::uint64_t seed = 1;
  fs::path work_dir = fs::temp_directory_path() / "botda_acceptance";
};

Outcome criterion_steady_state() {
  const double worst = steady_state_max_deviation(kDefaultLinewidthHz, 60e6, 40e-9, 400e-9);
  const double bound = 2.0 * std::exp(-std::numbers::pi * kDefaultLinewidthHz * 40e-9);
  return {worst <= bound * (1.0 + 1e-12),
          fmt::format("max |p(d,t) - p(0,t)| over |d| <= 60 MHz, t >= 40 ns: {:.6f} (bound "
                      "2 exp(-pi * 27 MHz * 40 ns) = {:.6f})",
                      worst, bound)};
}

ScenarioConfig distortion_pair() { return builtin_scenario("fig3c"); }

ScenarioConfig distortion_single() {
  ScenarioConfig c = builtin_scenario("fig3c");
  c.pulse.kind = PulseKind::Single;
  c.pulse.width_long_ns = 20.0;
  c.pulse.width_short_ns = 0.0;
  return c;
}

Outcome from_gate(const Gate& g) { return {g.pass, g.detail}; }

Outcome criterion_snr_resolution(const Options& o) {
  ExperimentOptions eo;
  eo.seed = o.seed;
  eo.realizations = o.realizations;
  const ResolutionScenario sc = resolution_scenario(eo);
  const std::vector<double> lengths{0.5, 1.0, 1.5};
  const auto t01 = find_spatial_resolution(sc, 0.1e6, lengths);
  const auto t05 = find_spatial_resolution(sc, 0.5e6, lengths);
  Outcome out = from_gate(gate_snr_resolution(t01, t05));
  out.detail += fmt::format(" [{} realizations, {} SNR]", sc.realizations, to_string(sc.snr_convention));
  return out;
}

Outcome criterion_sampling_rate(const Options& o) {
  ExperimentOptions eo;
  eo.seed = o.seed;
  eo.realizations = o.realizations;
  const ResolutionScenario sc = resolution_scenario(eo);
  const auto pts = run_sampling_rate_study(sc, {0.5e9, 1e9, 2e9, 5e9}, 26.0, 0.5);
  Outcome out = from_gate(gate_sampling_rate(pts));
  out.detail += fmt::format(" [{} realizations, {} SNR]", sc.realizations, to_string(sc.snr_convention));
  return out;
}

// Property checks, each against an oracle that does not share code with the
// implementation under test.

struct PropertyLog {
  std::vector<std::string> failed;
  int checked = 0;

  void check(bool ok, const std::string& what) {
    ++checked;
    if (!ok) failed.push_back(what);
  }
};

void property_detuning_real_part(PropertyLog& log) {
  double worst = 0.0;
  for (double lw : {20e6, 27e6, 35e6})
    for (double d = -200e6; d <= 200e6; d += 7.3e6) {
      const ComplexRate g = detuning_parameter(10.8e9, 10.8e9 + d, lw);
      worst = std::max(worst, std::abs(g.real_part - std::numbers::pi * lw) / (std::numbers::pi * lw));
    }
  log.check(worst <= 1e-12, fmt::format("Re(Gamma) = pi * linewidth (rel. error {:.2e})", worst));
}

DeconvKernel random_kernel(std::mt19937_64& rng, std::size_t len, int origin) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DeconvKernel k;
  k.samples.resize(len);
  for (double& s : k.samples) s = u(rng);
  k.origin_index = origin;
  return k;
}

void property_convolution(PropertyLog& log) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30 + static_cast<std::size_t>(trial) * 7;
    const DeconvKernel k = random_kernel(rng, 1 + static_cast<std::size_t>(trial % 9), trial % 3);
    std::vector<double> f(n);
    for (double& x : f) x = u(rng);
    // Scatter form of the convolution: sample j spreads to j + m - origin.
    std::vector<double> ref(n, 0.0);
    double scale = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t m = 0; m < k.samples.size(); ++m) {
        const long out = static_cast<long>(j + m) - k.origin_index;
        if (out >= 0 && out < static_cast<long>(n)) ref[static_cast<std::size_t>(out)] += k.samples[m] * f[j];
      }
    for (double x : ref) scale = std::max(scale, std::abs(x));
    const std::vector<double> got = apply_operator(k, f);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(got[i] - ref[i]) / scale);
  }
  log.check(worst <= 1e-12, fmt::format("convolution vs direct sum (rel. error {:.2e})", worst));
}

void property_tv_identities(PropertyLog& log) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  bool ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> f(2 + static_cast<std::size_t>(trial));
    for (double& x : f) x = u(rng);
    const double tv = tv_norm(f);
    std::vector<double> shifted = f, scaled = f, reversed(f.rbegin(), f.rend());
    for (double& x : shifted) x += 3.25;
    for (double& x : scaled) x *= -2.5;
    ok = ok && tv >= 0.0 && std::abs(tv_norm(shifted) - tv) <= 1e-12 * (1 + tv) &&
         std::abs(tv_norm(scaled) - 2.5 * tv) <= 1e-12 * (1 + tv) &&
         std::abs(tv_norm(reversed) - tv) <= 1e-12 * (1 + tv);
    std::vector<double> sorted = f;
    std::sort(sorted.begin(), sorted.end());
    ok = ok && std::abs(tv_norm(sorted) - (sorted.back() - sorted.front())) <= 1e-12 * (1 + tv);
  }
  const std::vector<double> flat(10, 1.7), step{0, 0, 0, 2, 2, 2};
  ok = ok && tv_norm(flat) == 0.0 && tv_norm(step) == 2.0;
  log.check(ok, "TV norm identities (constant, step, shift, scale, reversal, monotone)");
}

void property_mu_zero_identity(PropertyLog& log) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> g(200);
  for (double& x : g) x = u(rng);
  DeconvKernel k;
  k.samples = {1.0};
  const TvDeconvolver solver(k, g.size(), DeconvConfig{0.0, 2000, 1e-12});
  const RecoveredProfile r = solver.solve(g);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(r.samples[i] - g[i]));
  log.check(worst <= 1e-8, fmt::format("mu = 0 with identity kernel recovers g (max error {:.2e})", worst));
}

struct NoisyProblem {
  DeconvKernel kernel;
  std::vector<double> truth;
  std::vector<double> g;
};

NoisyProblem noisy_step_problem() {
  const SamplingGrid grid{1e-9, kDefaultGroupVelocity, 400, 0.0};
  NoisyProblem p;
  p.kernel = dpp_kernel(PulseScheme::pair(60e-9, 40e-9), kDefaultLinewidthHz, grid);
  p.truth.assign(grid.n_samples, 1.0);
  for (std::size_t i = 150; i < 170; ++i) p.truth[i] = 0.3;
  for (std::size_t i = 250; i < 255; ++i) p.truth[i] = 0.6;
  p.g = apply_operator(p.kernel, p.truth);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.05);
  for (double& x : p.g) x += n(rng);
  return p;
}

void property_objective(PropertyLog& log, const NoisyProblem& p) {
  DeconvConfig cfg{0.05, 3000, 1e-9};
  cfg.record_objective = true;
  const RecoveredProfile r = TvDeconvolver(p.kernel, p.g.size(), cfg).solve(p.g);
  bool monotone = !r.objective_history.empty();
  for (std::size_t i = 1; i < r.objective_history.size(); ++i)
    monotone = monotone && r.objective_history[i] <= r.objective_history[i - 1] * (1 + 1e-12);
  log.check(monotone, "recorded objective non-increasing");
  // The minimizer must beat any other candidate, including the truth and g.
  const double got = tv_objective(p.kernel, r.samples, p.g, cfg.mu);
  const double at_truth = tv_objective(p.kernel, p.truth, p.g, cfg.mu);
  const double at_g = tv_objective(p.kernel, p.g, p.g, cfg.mu);
  log.check(got <= at_truth && got <= at_g,
            fmt::format("objective {:.6g} below truth {:.6g} and input {:.6g}", got, at_truth, at_g));
}

void property_tv_monotone_in_mu(PropertyLog& log, const NoisyProblem& p) {
  double prev = std::numeric_limits<double>::infinity();
  bool ok = true;
  std::string trail;
  for (double mu : {0.001, 0.01, 0.1, 1.0, 10.0}) {
    const RecoveredProfile r = TvDeconvolver(p.kernel, p.g.size(), DeconvConfig{mu, 5000, 1e-10}).solve(p.g);
    const double tv = tv_norm(r.samples);
    ok = ok && tv <= prev * (1 + 1e-3) + 1e-9;
    trail += fmt::format(" {:.4g}", tv);
    prev = tv;
  }
  log.check(ok, "TV of the solution non-increasing in mu:" + trail);
}

double pair_deviation(const PulseScheme& pair) {
  const double lw = kDefaultLinewidthHz;
  const ComplexRate g0 = detuning_parameter(10.8e9, 10.8e9, lw);
  double worst = 0.0;
  for (double d = -60e6; d <= 60e6; d += 1e6) {
    const ComplexRate g = detuning_parameter(10.8e9, 10.8e9 + d, lw);
    for (double t = 0.0; t <= pair.width_long_s; t += 0.1e-9)
      worst = std::max(worst, std::abs(pair_envelope(g, pair, t) - pair_envelope(g0, pair, t)));
  }
  return worst;
}

void property_dpp_bound(PropertyLog& log) {
  const double bound = 2.0 * std::exp(-std::numbers::pi * kDefaultLinewidthHz * 40e-9);
  const double good = pair_deviation(PulseScheme::pair(60e-9, 40e-9));
  const double bad = pair_deviation(PulseScheme::pair(30e-9, 10e-9));
  log.check(good <= bound, fmt::format("60/40 ns pair deviation {:.4f} <= {:.4f}", good, bound));
  log.check(bad > bound, fmt::format("30/10 ns pair deviation {:.4f} > {:.4f}", bad, bound));
}

void property_noise_round_trip(PropertyLog& log) {
  ScenarioConfig c;
  c.fiber.length_m = 200.0;
  const FiberProfile fiber = c.fiber_profile();
  const SamplingGrid grid = c.sampling_grid();
  const GainTrace clean =
      simulate_normalized_trace(fiber, PulseScheme::pair(60e-9, 40e-9), 10.8e9, grid);
  const IndexRange section = range_for_positions(grid, 20.0, 180.0);
  for (SnrConvention conv : {SnrConvention::Amplitude, SnrConvention::Ratio})
    for (double target : {10.0, 20.0, 30.0}) {
      const GainTrace noisy = add_noise(clean, NoiseSpec{target, 42, conv});
      const double got = snr_oracle(noisy.samples, clean.samples, section, 1, conv).snr_db;
      log.check(std::abs(got - target) <= 0.3,
                fmt::format("noise injection {} dB ({}) measured {:.3f} dB", target, to_string(conv), got));
    }
}

BgsMap noisy_map(std::uint64_t seed) {
  const ScenarioConfig c = builtin_scenario("fig3c");
  return simulate_bgs(c.fiber_profile(), c.pulse_scheme(), c.frequency_sweep(), c.sampling_grid(),
                      NoiseSpec{20.0, seed, SnrConvention::Amplitude});
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void property_persistence(PropertyLog& log, const Options& o, const BgsMap& map) {
  fs::create_directories(o.work_dir);
  const fs::path a = o.work_dir / "roundtrip_a.bgs", b = o.work_dir / "roundtrip_b.bgs";
  write_bgs(a, map, "0123456789abcdef");
  const BgsMap back = read_bgs(a);
  bool bitwise = back.traces.size() == map.traces.size();
  for (std::size_t i = 0; bitwise && i < map.traces.size(); ++i)
    bitwise = std::memcmp(back.traces[i].samples.data(), map.traces[i].samples.data(),
                          map.n_samples() * sizeof(double)) == 0;
  write_bgs(b, back, "0123456789abcdef");
  log.check(bitwise && back == map, "BGS map survives write/read bit for bit");
  log.check(file_bytes(a) == file_bytes(b), "re-written file is byte-identical");
}

void property_determinism(PropertyLog& log, const BgsMap& map) {
  const ScenarioConfig c = builtin_scenario("fig3c");
  const DeconvKernel k = dpp_kernel(c.pulse_scheme(), kDefaultLinewidthHz, map.grid(), c.kernel_options());
  const DeconvConfig cfg{0.01, 300, 1e-6};
  const int before = thread_count();
  set_thread_count(1);
  const BgsMap sim1 = noisy_map(9);
  const RecoveredMap rec1 = tv_deconvolve(map, k, cfg);
  set_thread_count(4);
  const BgsMap sim4 = noisy_map(9);
  const RecoveredMap rec4 = tv_deconvolve(map, k, cfg);
  set_thread_count(before);
  log.check(sim1 == sim4, "simulation identical with 1 and 4 threads");
  log.check(rec1.map == rec4.map, "deconvolution identical with 1 and 4 threads");
  log.check(!(noisy_map(9) == noisy_map(10)), "different seeds give different noise");
}

Outcome criterion_properties(const Options& o) {
  PropertyLog log;
  property_detuning_real_part(log);
  property_convolution(log);
  property_tv_identities(log);
  property_mu_zero_identity(log);
  const NoisyProblem p = noisy_step_problem();
  property_objective(log, p);
  property_tv_monotone_in_mu(log, p);
  property_dpp_bound(log);
  property_noise_round_trip(log);
  const BgsMap map = noisy_map(o.seed);
  property_persistence(log, o, map);
  property_determinism(log, map);
  std::string detail = fmt::format("{}/{} property checks hold", log.checked - log.failed.size(), log.checked);
  for (const std::string& f : log.failed) detail += "; failed: " + f;
  return {log.failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BOTDA acceptance suite"};
  Options o;
  std::vector<int> only, expected_fail;
  app.add_option("--realizations", o.realizations, "Monte Carlo realizations for criteria 4 and 5")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--seed", o.seed, "Noise seed")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',')->check(CLI::Range(1, 7));
  app.add_option("--expected-fail", expected_fail, "Criteria known to fail (documented)")
      ->delimiter(',')
      ->check(CLI::Range(1, 7));
  app.add_option("--work-dir", o.work_dir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  // The distortion cases are shared by criteria 2, 3 and 6.
  std::optional<DistortionCase> single, pair;
  auto get_single = [&]() -> const DistortionCase& {
    if (!single) single = run_distortion_case(distortion_single());
    return *single;
  };
  auto get_pair = [&]() -> const DistortionCase& {
    if (!pair) pair = run_distortion_case(distortion_pair());
    return *pair;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"steady-state envelope bound", criterion_steady_state},
      {"single-pulse distortion reproduced", [&] { return from_gate(gate_distortion_reproduced(get_single())); }},
      {"DPP distortion eliminated", [&] { return from_gate(gate_distortion_eliminated(get_pair())); }},
      {"SNR improvement vs resolution", [&] { return criterion_snr_resolution(o); }},
      {"degradation vs sampling rate", [&] { return criterion_sampling_rate(o); }},
      {"Lorentzian FWHM of recovered BGS", [&] { return from_gate(gate_lorentzian_width(get_pair())); }},
      {"property suites", [&] { return criterion_properties(o); }},
  };
  const std::set<int> run(only.begin(), only.end());
  const std::set<int> xfail(expected_fail.begin(), expected_fail.end());
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!run.empty() && !run.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool expected = xfail.count(id) > 0;
    std::string tag = out.pass ? "PASS" : "FAIL";
    if (expected) tag += out.pass ? " (XPASS: listed as expected failure)" : " (expected failure)";
    std::cout << fmt::format("{} criterion {}: {} [{:.1f} s] {}", tag, id, criteria[i].first, secs,
                             out.detail)
              << std::endl;
    if (out.pass == expected) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
