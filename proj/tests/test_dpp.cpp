#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "botda/dpp.hpp"
#include "botda/errors.hpp"
#include "botda/simulator.hpp"

using namespace botda;

namespace {

GainTrace constant_trace(double value, double width_s, std::size_t n = 50) {
  GainTrace t;
  t.samples.assign(n, value);
  t.grid.n_samples = n;
  t.probe_offset_hz = 10.8e9;
  t.meta.pulse = PulseScheme::single(width_s);
  return t;
}

double max_pair_deviation(const PulseScheme& pair, double lw) {
  const ComplexRate g0 = detuning_parameter(10.8e9, 10.8e9, lw);
  double worst = 0.0;
  for (double d = -60e6; d <= 60e6; d += 0.5e6) {
    const ComplexRate g = detuning_parameter(10.8e9, 10.8e9 + d, lw);
    for (double t = 0.0; t < pair.width_long_s; t += 0.25e-9)
      worst = std::max(worst, std::abs(pair_envelope(g, pair, t) - pair_envelope(g0, pair, t)));
  }
  return worst;
}

}  // namespace

TEST_CASE("identical traces difference to zero") {
  GainTrace a = constant_trace(0.7, 60e-9), b = constant_trace(0.7, 40e-9);
  const GainTrace d = differential_trace(a, b);
  for (double x : d.samples) CHECK(x == 0.0);
  CHECK(d.meta.pulse == PulseScheme::pair(60e-9, 40e-9));
}

TEST_CASE("differential trace is linear") {
  GainTrace x = constant_trace(0.0, 60e-9), u = constant_trace(0.0, 40e-9);
  GainTrace y = x, v = u;
  for (std::size_t k = 0; k < x.samples.size(); ++k) {
    x.samples[k] = std::sin(0.3 * k);
    u.samples[k] = std::cos(0.2 * k);
    y.samples[k] = 0.1 * k;
    v.samples[k] = 1.0 / (1.0 + k);
  }
  const double a = -2.5;
  GainTrace ax_y = x, au_v = u;
  for (std::size_t k = 0; k < x.samples.size(); ++k) {
    ax_y.samples[k] = a * x.samples[k] + y.samples[k];
    au_v.samples[k] = a * u.samples[k] + v.samples[k];
  }
  const GainTrace lhs = differential_trace(ax_y, au_v);
  const GainTrace d1 = differential_trace(x, u), d2 = differential_trace(y, v);
  for (std::size_t k = 0; k < x.samples.size(); ++k)
    CHECK(lhs.samples[k] == doctest::Approx(a * d1.samples[k] + d2.samples[k]).epsilon(1e-12));
}

TEST_CASE("mismatched traces are rejected") {
  GainTrace a = constant_trace(1.0, 60e-9), b = constant_trace(1.0, 40e-9);
  b.probe_offset_hz += 1e6;
  CHECK_THROWS_AS(differential_trace(a, b), ContractError);
  GainTrace c = constant_trace(1.0, 40e-9, 51);
  CHECK_THROWS_AS(differential_trace(a, c), ContractError);
}

TEST_CASE("pair kernel closed-form values") {
  const SamplingGrid grid{1e-9, kDefaultGroupVelocity, 400, 0.0};
  const PulseScheme pair = PulseScheme::pair(60e-9, 40e-9);
  const auto raw = raw_peak_envelope_samples(pair, 27e6, grid, KernelSampling::Point);
  CHECK(raw.at(50) == doctest::Approx(0.98562).epsilon(1e-5));
  CHECK(raw.at(50) == doctest::Approx(1.0 - std::exp(-std::numbers::pi * 27e6 * 50e-9)).epsilon(1e-12));
  const DeconvKernel k = dpp_kernel(pair, 27e6, grid);
  CHECK(std::accumulate(k.samples.begin(), k.samples.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(static_cast<double>(k.support_length()) - 20.0) <= 1.0);
  CHECK(std::abs(static_cast<double>(k.first_nonzero()) - 40.0) <= 1.0);
}

TEST_CASE("pair envelope cancellation bound") {
  const double lw = 27e6;
  CHECK(cancellation_bound(40e-9, lw) == doctest::Approx(0.0672).epsilon(1e-3));
  CHECK(max_pair_deviation(PulseScheme::pair(60e-9, 40e-9), lw) <= cancellation_bound(40e-9, lw) * (1 + 1e-12));
  CHECK(max_pair_deviation(PulseScheme::pair(30e-9, 10e-9), lw) > cancellation_bound(40e-9, lw));
  CHECK(cancellation_bound(10e-9, lw) == doctest::Approx(0.85).epsilon(0.01));
}

TEST_CASE("short pairs need an explicit override") {
  const SamplingGrid grid{1e-9, kDefaultGroupVelocity, 400, 0.0};
  CHECK(min_pair_short_width_s(27e6) == doctest::Approx(40e-9).epsilon(1e-3));
  CHECK_THROWS_AS(dpp_kernel(PulseScheme::pair(30e-9, 10e-9), 27e6, grid), ValidationError);
  CHECK_NOTHROW(dpp_kernel(PulseScheme::pair(30e-9, 10e-9), 27e6, grid, {true, KernelSampling::Point}));
  CHECK_NOTHROW(check_pair_widths(PulseScheme::single(20e-9), 27e6, false));
}
