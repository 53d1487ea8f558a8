#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "botda/bgs_analysis.hpp"
#include "botda/dpp.hpp"
#include "botda/errors.hpp"
#include "botda/parallel.hpp"
#include "botda/simulator.hpp"

using namespace botda;

namespace {

SamplingGrid grid_for(double fiber_m, double lead_s = 100e-9, double dt = 1e-9) {
  const auto n = static_cast<std::size_t>(std::ceil((2.0 * fiber_m / kDefaultGroupVelocity + 2.0 * lead_s) / dt)) + 1;
  return {dt, kDefaultGroupVelocity, n, -lead_s};
}

double mean_over(const std::vector<double>& x, IndexRange r) {
  double s = 0.0;
  for (std::size_t k = r.begin; k < r.end; ++k) s += x[k];
  return s / static_cast<double>(r.size());
}

double sample_std(const std::vector<double>& x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace

TEST_CASE("normalized uniform-fiber plateau equals one") {
  const FiberProfile fiber(30.0, 10.8e9);
  const SamplingGrid grid = grid_for(30.0);
  for (const PulseScheme& p : {PulseScheme::single(60e-9), PulseScheme::pair(60e-9, 40e-9)}) {
    const GainTrace t = simulate_normalized_trace(fiber, p, 10.8e9, grid);
    const IndexRange r = raw_trace_range(grid, p, 5.0, 20.0);
    for (std::size_t k = r.begin; k < r.end; ++k) CHECK(std::abs(t.samples[k] - 1.0) <= 1e-6);
  }
}

TEST_CASE("traces are causal") {
  const FiberProfile fiber(10.0, 10.8e9, {{3.0, 1.0, 10.83e9}});
  const SamplingGrid grid = grid_for(10.0);
  const GainTrace t = simulate_trace(fiber, PulseScheme::single(60e-9), 10.81e9, grid);
  for (std::size_t k = 0; k < grid.n_samples; ++k)
    if (grid.time_at(k) <= 0.0) CHECK(t.samples[k] == 0.0);
}

TEST_CASE("gain scale scales every sample") {
  const FiberProfile f1(10.0, 10.8e9, {{3.0, 1.0, 10.83e9}}, 27e6, 1.0);
  const FiberProfile f3 = f1.with_gain_scale(3.0);
  const SamplingGrid grid = grid_for(10.0);
  const GainTrace a = simulate_trace(f1, PulseScheme::single(60e-9), 10.81e9, grid);
  const GainTrace b = simulate_trace(f3, PulseScheme::single(60e-9), 10.81e9, grid);
  for (std::size_t k = 0; k < grid.n_samples; ++k)
    CHECK(b.samples[k] == doctest::Approx(3.0 * a.samples[k]).epsilon(1e-12));
}

TEST_CASE("section boundary is spread over the pulse length") {
  // Two 20 m sections; at the first section's BFS the trace falls from its
  // plateau to the second section's level over exactly 60 ns (6 m).
  const FiberProfile fiber(40.0, 10.8e9, {{20.0, 20.0, 10.83e9}});
  const SamplingGrid grid = grid_for(40.0);
  const GainTrace t = simulate_trace(fiber, PulseScheme::single(60e-9), 10.8e9, grid);
  auto at = [&](double time) { return t.samples[static_cast<std::size_t>(std::lround((time - grid.t0_s) / grid.dt_s))]; };
  const double t_boundary = 2.0 * 20.0 / kDefaultGroupVelocity;
  const double before = at(t_boundary - 5e-9), after = at(t_boundary + 65e-9);
  CHECK(at(t_boundary) == doctest::Approx(before).epsilon(1e-9));
  CHECK(at(t_boundary + 60e-9) == doctest::Approx(after).epsilon(1e-6));
  CHECK(std::abs(at(t_boundary + 30e-9) - before) > 0.1 * std::abs(before - after));
}

TEST_CASE("grid too short is a configuration error") {
  const FiberProfile fiber(10.0, 10.8e9);
  const SamplingGrid short_grid{1e-9, kDefaultGroupVelocity, 50, -100e-9};
  CHECK_THROWS_AS(simulate_trace(fiber, PulseScheme::single(60e-9), 10.8e9, short_grid), ConfigError);
}

TEST_CASE("shifting the fiber shifts the trace") {
  const SamplingGrid grid = grid_for(12.0);
  const FiberProfile a(12.0, 10.8e9, {{4.0, 1.0, 10.83e9}});
  const FiberProfile b(12.0, 10.8e9, {{5.0, 1.0, 10.83e9}});
  const GainTrace ta = simulate_normalized_trace(a, PulseScheme::pair(60e-9, 40e-9), 10.83e9, grid);
  const GainTrace tb = simulate_normalized_trace(b, PulseScheme::pair(60e-9, 40e-9), 10.83e9, grid);
  const std::size_t shift = 10;  // 1 m = 10 ns two-way
  for (std::size_t k = 160; k < 210; ++k) CHECK(tb.samples[k + shift] == doctest::Approx(ta.samples[k]).epsilon(1e-9));
}

TEST_CASE("sweep of one frequency equals simulate_trace") {
  const FiberProfile fiber(10.0, 10.8e9, {{3.0, 1.0, 10.83e9}});
  const SamplingGrid grid = grid_for(10.0);
  const BgsMap m = simulate_bgs(fiber, PulseScheme::single(60e-9), {10.81e9, 1e6, 1}, grid);
  REQUIRE(m.n_freqs() == 1);
  CHECK(m.traces[0].samples ==
        normalize_trace(simulate_trace(fiber, PulseScheme::single(60e-9), 10.81e9, grid), fiber).samples);
}

TEST_CASE("noise level follows the SNR definition") {
  CHECK(noise_sigma(1.0, 23.0) == doctest::Approx(0.0707946).epsilon(1e-6));
  CHECK(noise_sigma(1.0, 23.0, SnrConvention::Ratio) == doctest::Approx(std::pow(10.0, -23.0 / 10.0)));
  CHECK(noise_sigma(1.0, std::numeric_limits<double>::infinity()) == 0.0);
  GainTrace t;
  t.samples.assign(100, 1.0);
  t.grid.n_samples = 100;
  CHECK_THROWS_AS(add_noise(t, NoiseSpec{23.0, 1}), ContractError);
  t.meta.normalized = true;
  CHECK(add_noise(t, NoiseSpec{}).samples == t.samples);
}

TEST_CASE("injected noise round-trips through the oracle SNR") {
  GainTrace t;
  t.samples.assign(20000, 1.0);
  t.grid.n_samples = t.samples.size();
  t.meta.normalized = true;
  for (double target : {10.0, 23.0, 35.0}) {
    const GainTrace n = add_noise(t, NoiseSpec{target, 99});
    const double got = snr_oracle(n.samples, t.samples, {0, t.samples.size()}, 1).snr_db;
    CHECK(std::abs(got - target) <= 0.3);
  }
}

TEST_CASE("injected noise is white") {
  GainTrace t;
  t.samples.assign(20000, 0.0);
  t.grid.n_samples = t.samples.size();
  t.meta.normalized = true;
  const GainTrace n = add_noise(t, NoiseSpec{20.0, 5});
  const double var = sample_std(n.samples) * sample_std(n.samples);
  const double bound = 3.0 / std::sqrt(static_cast<double>(n.samples.size()));
  for (std::size_t lag : {1u, 2u, 7u}) {
    double c = 0.0;
    for (std::size_t k = lag; k < n.samples.size(); ++k) c += n.samples[k] * n.samples[k - lag];
    CHECK(std::abs(c / static_cast<double>(n.samples.size() - lag) / var) <= bound);
  }
}

TEST_CASE("difference of two noisy traces has sigma times sqrt 2") {
  GainTrace t;
  t.samples.assign(40000, 1.0);
  t.grid.n_samples = t.samples.size();
  t.meta.normalized = true;
  t.meta.pulse = PulseScheme::single(60e-9);
  GainTrace s = t;
  s.meta.pulse = PulseScheme::single(40e-9);
  const GainTrace a = add_noise(t, NoiseSpec{20.0, 1});
  const GainTrace b = add_noise(s, NoiseSpec{20.0, 2});
  const GainTrace d = differential_trace(a, b);
  const double sigma = noise_sigma(1.0, 20.0);
  CHECK(sample_std(d.samples) == doctest::Approx(sigma * std::sqrt(2.0)).epsilon(0.05));
  // Relative to a unit plateau the SNR drops by 10 log10(2) = 3.01 dB.
  const std::vector<double> ones(t.samples.size(), 1.0), zeros(t.samples.size(), 0.0);
  std::vector<double> shifted = d.samples;
  for (double& x : shifted) x += 1.0;
  const double each = snr_oracle(a.samples, ones, {0, ones.size()}, 1).snr_db;
  const double diff = snr_oracle(shifted, ones, {0, ones.size()}, 1).snr_db;
  CHECK(each - diff == doctest::Approx(3.0103).epsilon(0.1));
}

TEST_CASE("same seed gives identical maps, independent of thread count") {
  const FiberProfile fiber(10.0, 10.8e9, {{3.0, 1.0, 10.83e9}});
  const SamplingGrid grid = grid_for(10.0);
  const FrequencySweep sweep{10.75e9, 2e6, 40};
  const int before = thread_count();
  set_thread_count(1);
  const BgsMap a = simulate_bgs(fiber, PulseScheme::pair(60e-9, 40e-9), sweep, grid, NoiseSpec{23.0, 4});
  set_thread_count(3);
  const BgsMap b = simulate_bgs(fiber, PulseScheme::pair(60e-9, 40e-9), sweep, grid, NoiseSpec{23.0, 4});
  set_thread_count(before);
  CHECK(a == b);
  const BgsMap c = simulate_bgs(fiber, PulseScheme::pair(60e-9, 40e-9), sweep, grid, NoiseSpec{23.0, 5});
  CHECK_FALSE(a == c);
  CHECK(a.traces[0].samples != a.traces[1].samples);
}

TEST_CASE("sweep coverage warning") {
  const FiberProfile fiber(10.0, 10.8e9, {{3.0, 1.0, 10.83e9}});
  CHECK_FALSE(sweep_coverage_warning(fiber, {10.7e9, 1e6, 231}).has_value());
  CHECK(sweep_coverage_warning(fiber, {10.79e9, 1e6, 20}).has_value());
}
