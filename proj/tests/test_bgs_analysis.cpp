#include <doctest.h>

#include <cmath>
#include <random>

#include "botda/bgs_analysis.hpp"
#include "botda/errors.hpp"
#include "botda/lorentzian.hpp"
#include "botda/resolution.hpp"
#include "botda/simulator.hpp"

using namespace botda;

namespace {

std::vector<double> axis(double start, double step, std::size_t n) {
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = start + step * static_cast<double>(i);
  return f;
}

BfsProfile truth_profile(const FiberProfile& fiber, double step_m) {
  BfsProfile p;
  for (double z = 0.0; z < fiber.length_m(); z += step_m) {
    BfsPoint q;
    q.position_m = z;
    q.bfs_hz = fiber.bfs_at(z);
    q.fit_ok = true;
    q.fwhm_hz = 27e6;
    q.peak_gain = 1.0;
    p.points.push_back(q);
  }
  return p;
}

}  // namespace

TEST_CASE("exact Lorentzian samples are fitted to within 10 kHz") {
  const auto f = axis(10.7e9, 1e6, 201);
  for (double center : {10.8e9, 10.8137e9, 10.7752e9}) {
    std::vector<double> g;
    for (double nu : f) g.push_back(lorentzian(nu, 0.8, center, 27e6));
    const LorentzianFit fit = fit_lorentzian(f, g);
    REQUIRE(fit.ok);
    CHECK(std::abs(fit.bfs_hz - center) < 10e3);
    CHECK(fit.fwhm_hz == doctest::Approx(27e6).epsilon(1e-6));
    CHECK(fit.peak_gain == doctest::Approx(0.8).epsilon(1e-6));
  }
}

TEST_CASE("fit is equivariant under scaling and frequency offsets") {
  const auto f = axis(10.7e9, 2e6, 100);
  std::vector<double> g, g3;
  for (double nu : f) {
    g.push_back(lorentzian(nu, 1.0, 10.81e9, 30e6) + 0.01 * std::sin(nu / 7e6));
    g3.push_back(3.0 * g.back());
  }
  const LorentzianFit a = fit_lorentzian(f, g), b = fit_lorentzian(f, g3);
  REQUIRE(a.ok);
  REQUIRE(b.ok);
  CHECK(b.bfs_hz == doctest::Approx(a.bfs_hz).epsilon(1e-9));
  CHECK(b.fwhm_hz == doctest::Approx(a.fwhm_hz).epsilon(1e-6));
  CHECK(b.peak_gain == doctest::Approx(3.0 * a.peak_gain).epsilon(1e-6));
  auto shifted = f;
  for (double& nu : shifted) nu += 5e6;
  const LorentzianFit c = fit_lorentzian(shifted, g);
  CHECK(c.bfs_hz - a.bfs_hz == doctest::Approx(5e6).epsilon(1e-6));
}

TEST_CASE("fit failures are explicit") {
  const auto f = axis(10.7e9, 1e6, 5);
  const std::vector<double> g{1, 2, 3, 2, 1};
  const LorentzianFit fit = fit_lorentzian(f, g);
  CHECK_FALSE(fit.ok);
  CHECK_FALSE(fit.failure.empty());
  const auto wide = axis(10.7e9, 1e6, 50);
  const LorentzianFit flat = fit_lorentzian(wide, std::vector<double>(50, 0.0));
  CHECK_FALSE(flat.ok);
}

TEST_CASE("uniform fiber gives a constant profile") {
  const FiberProfile fiber(10.0, 10.8e9);
  const SamplingGrid grid{1e-9, kDefaultGroupVelocity, 221, -60e-9};
  const PulseScheme p = PulseScheme::pair(60e-9, 40e-9);
  const BgsMap map = simulate_bgs(fiber, p, {10.7e9, 1e6, 201}, grid);
  const BfsProfile prof = bfs_profile(map, raw_trace_range(grid, p, 1.0, 8.0));
  REQUIRE_FALSE(prof.points.empty());
  for (const BfsPoint& q : prof.points) {
    CHECK(q.fit_ok);
    CHECK(std::abs(q.bfs_hz - 10.8e9) < 10e3);
  }
}

TEST_CASE("degradation and systematic error on a perfect profile are zero") {
  const FiberProfile fiber(20.0, 10.8e9, {{5.0, 1.0, 10.83e9}, {12.0, 0.5, 10.83e9}});
  const BfsProfile p = truth_profile(fiber, 0.1);
  CHECK(bfs_degradation(p, fiber, 0) == 0.0);
  CHECK(bfs_degradation(p, fiber, 1) == 0.0);
  CHECK(max_systematic_error(p, fiber, 0.0, 20.0) == 0.0);
  CHECK_THROWS_AS(max_systematic_error(p, fiber, 30.0, 31.0), DomainError);
  const FiberProfile tiny(20.0, 10.8e9, {{5.0, 0.15, 10.83e9}});
  CHECK_THROWS_AS(bfs_degradation(truth_profile(tiny, 0.1), tiny, 0), DomainError);
}

TEST_CASE("degradation averages the central third of the hotspot") {
  const FiberProfile fiber(20.0, 10.8e9, {{6.0, 1.5, 10.83e9}});
  BfsProfile p = truth_profile(fiber, 0.1);
  for (BfsPoint& q : p.points)
    if (q.position_m >= 6.5 - 1e-9 && q.position_m <= 7.0 + 1e-9) q.bfs_hz -= 2e6;
  CHECK(bfs_degradation(p, fiber, 0) == doctest::Approx(2e6));
  CHECK(max_systematic_error(p, fiber, 0.0, 20.0) == doctest::Approx(2e6));
}

TEST_CASE("oracle and blind SNR") {
  std::vector<double> clean(5000, 1.0), noisy = clean;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.0708);
  for (double& x : noisy) x += n(rng);
  const IndexRange all{0, clean.size()};
  const double oracle = snr_oracle(noisy, clean, all, 20).snr_db;
  CHECK(oracle == doctest::Approx(23.0).epsilon(0.3 / 23.0));
  CHECK(std::isinf(snr_oracle(clean, clean, all, 20).snr_db));
  CHECK(std::abs(snr_blind(noisy, all, 20).snr_db - oracle) <= 1.0);
  CHECK_THROWS_AS(snr_blind(noisy, {0, 50}, 20), DomainError);
  CHECK(snr_oracle(noisy, clean, all, 20, SnrConvention::Ratio).snr_db == doctest::Approx(oracle / 2.0));
}

TEST_CASE("profiles average over realizations and keep failure markers") {
  BfsProfile a, b;
  for (int i = 0; i < 3; ++i) {
    a.points.push_back({0.1 * i, 10.8e9 + 1e6, 1.0, 27e6, 0.0, true, ""});
    b.points.push_back({0.1 * i, 10.8e9 - 3e6, 1.0, 27e6, 0.0, i != 2, i != 2 ? "" : "diverged"});
  }
  b.points[2].bfs_hz = 0.0;
  const std::vector<BfsProfile> both{a, b};
  const BfsProfile m = average_profiles(both);
  CHECK(m.points[0].bfs_hz == doctest::Approx(10.8e9 - 1e6));
  CHECK(m.points[2].bfs_hz == doctest::Approx(10.8e9 + 1e6));
}

TEST_CASE("an unbounded tolerance saturates the mu search") {
  ResolutionScenario sc;
  sc.realizations = 2;
  sc.fiber_length_m = 12.5;
  const HotspotStudy study(sc, 1.0);
  const MuSearchResult r = search_mu_for_degradation(study, 1e12);
  CHECK(r.status == MuSearchStatus::SaturatedHigh);
  CHECK(r.best.mu == doctest::Approx(sc.mu_max));
}
