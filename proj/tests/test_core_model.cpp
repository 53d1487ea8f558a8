#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "botda/core_model.hpp"
#include "botda/errors.hpp"
#include "botda/simulator.hpp"

using namespace botda;

namespace {

/// Direct composite-Simpson evaluation of
///   g(t) = Re sum_sections integral h(z) (1 - exp(-conj(Gamma) (t - 2z/V))) dz
/// over the z range where 0 <= t - 2z/V < T.
double quadrature_gain(const FiberProfile& fiber, double width, double nu, double t, double v) {
  double total = 0.0;
  for (const FiberSegment& s : fiber.segments()) {
    const double lo = std::max(s.start_m, (t - width) * v / 2.0);
    const double hi = std::min(s.end_m, t * v / 2.0);
    if (hi <= lo) continue;
    const double lw = fiber.linewidth_hz();
    const std::complex<double> gamma =
        std::complex<double>(0.0, std::numbers::pi) *
        std::complex<double>(s.bfs_hz * s.bfs_hz - nu * nu, -nu * lw) / nu;
    const std::complex<double> h = fiber.gain_scale() / (2.0 * std::conj(gamma));
    auto f = [&](double z) { return (h * (1.0 - std::exp(-std::conj(gamma) * (t - 2.0 * z / v)))).real(); };
    const int n = 4000;
    const double step = (hi - lo) / n;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) acc += f(lo + i * step) * (i % 2 ? 4.0 : 2.0);
    total += acc * step / 3.0;
  }
  return total;
}

}  // namespace

TEST_CASE("detuning parameter real part is pi times the linewidth") {
  for (double lw : {10e6, 27e6, 40e6})
    for (double d : {-150e6, -30e6, 0.0, 12.5e6, 90e6}) {
      const ComplexRate g = detuning_parameter(10.8e9, 10.8e9 + d, lw);
      CHECK(std::abs(g.real_part / (std::numbers::pi * lw) - 1.0) <= 1e-12);
    }
}

TEST_CASE("detuning parameter imaginary part tracks the detuning") {
  const ComplexRate at_peak = detuning_parameter(10.8e9, 10.8e9, 27e6);
  CHECK(std::abs(at_peak.imag_part) < 1e-3);
  const ComplexRate g = detuning_parameter(10.8e9, 10.8e9 + 10e6, 27e6);
  CHECK(g.imag_part == doctest::Approx(-2.0 * std::numbers::pi * 10e6).epsilon(1e-2));
}

TEST_CASE("envelope is gated to the pulse and saturates") {
  const ComplexRate g = detuning_parameter(10.8e9, 10.8e9, 27e6);
  CHECK(envelope(g, 60e-9, -1e-9) == std::complex<double>(0.0, 0.0));
  CHECK(envelope(g, 60e-9, 60e-9) == std::complex<double>(0.0, 0.0));
  CHECK(std::abs(envelope(g, 60e-9, 0.0)) < 1e-15);
  CHECK(std::abs(envelope(g, 60e-9, 59e-9) - 1.0) < 1e-2);
}

TEST_CASE("envelope integral matches Simpson quadrature of the envelope") {
  for (double d : {0.0, 25e6, -60e6}) {
    const ComplexRate g = detuning_parameter(10.8e9, 10.8e9 + d, 27e6);
    const double a = 3e-9, b = 47e-9;
    const int n = 20000;
    const double h = (b - a) / n;
    std::complex<double> acc = envelope(g, 60e-9, a) + envelope(g, 60e-9, b);
    for (int i = 1; i < n; ++i) acc += envelope(g, 60e-9, a + i * h) * (i % 2 ? 4.0 : 2.0);
    acc *= h / 3.0;
    const std::complex<double> got = envelope_integral(g, 60e-9, a, b);
    CHECK(std::abs(got - acc) <= 1e-9 * std::abs(acc));
  }
}

TEST_CASE("simulated trace equals direct quadrature of the forward model") {
  const FiberProfile fiber(12.0, 10.8e9, {{4.0, 1.3, 10.83e9}, {8.2, 0.4, 10.79e9}});
  const PulseScheme pulse = PulseScheme::single(60e-9);
  const SamplingGrid grid{1e-9, kDefaultGroupVelocity, 250, -61e-9};
  for (double nu : {10.8e9, 10.815e9, 10.76e9}) {
    const GainTrace tr = simulate_trace(fiber, pulse, nu, grid);
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < grid.n_samples; k += 7) {
      const double ref = quadrature_gain(fiber, 60e-9, nu, grid.time_at(k), grid.group_velocity_m_per_s);
      worst = std::max(worst, std::abs(tr.samples[k] - ref));
      scale = std::max(scale, std::abs(ref));
    }
    CHECK(worst <= 1e-9 * scale);
  }
}

TEST_CASE("fiber profile validation and segments") {
  CHECK_THROWS_AS(FiberProfile(-1.0, 10.8e9), DomainError);
  CHECK_THROWS_AS(FiberProfile(10.0, 10.8e9, {{8.0, 4.0, 10.83e9}}), DomainError);
  CHECK_THROWS_AS(FiberProfile(10.0, 10.8e9, {{2.0, 2.0, 10.83e9}, {3.0, 1.0, 10.83e9}}), DomainError);
  const FiberProfile f(10.0, 10.8e9, {{2.0, 1.0, 10.83e9}});
  CHECK(f.bfs_at(1.99) == 10.8e9);
  CHECK(f.bfs_at(2.0) == 10.83e9);
  CHECK(f.bfs_at(3.0) == 10.8e9);
  const auto segs = f.segments();
  REQUIRE(segs.size() == 3);
  CHECK(segs[1].start_m == 2.0);
  CHECK(segs[1].end_m == 3.0);
}

TEST_CASE("pulse scheme resolution") {
  CHECK(PulseScheme::single(20e-9).effective_resolution_m() == doctest::Approx(2.0));
  CHECK(PulseScheme::pair(60e-9, 40e-9).effective_resolution_m() == doctest::Approx(2.0));
  CHECK_THROWS_AS(PulseScheme::pair(40e-9, 60e-9).validate(), DomainError);
}
