#include <doctest.h>

#include <cmath>
#include <random>

#include "botda/dpp.hpp"
#include "botda/errors.hpp"
#include "botda/simulator.hpp"
#include "botda/tv_deconv.hpp"

using namespace botda;

namespace {

DeconvKernel rectangle(std::size_t len) {
  DeconvKernel k;
  k.samples.assign(len, 1.0 / static_cast<double>(len));
  return k;
}

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<double> step_profile(std::size_t n, std::size_t at) {
  std::vector<double> f(n, 0.0);
  for (std::size_t i = at; i < n - 40; ++i) f[i] = 1.0;
  return f;
}

}  // namespace

TEST_CASE("tv norm") {
  CHECK(tv_norm(std::vector<double>{3, 3, 3}) == 0.0);
  CHECK(tv_norm(std::vector<double>{0, 1, 0}) == 2.0);
  CHECK(tv_norm(std::vector<double>{-1, 0, 2.5, 7}) == doctest::Approx(8.0));
  CHECK_THROWS_AS(tv_norm(std::vector<double>{1.0}), DomainError);
}

TEST_CASE("convolution identities") {
  const DeconvKernel k = rectangle(5);
  std::vector<double> impulse(30, 0.0);
  impulse[10] = 1.0;
  const auto out = apply_operator(k, impulse);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == (i >= 10 && i < 15 ? 0.2 : 0.0));
  const auto ones = apply_operator(k, std::vector<double>(30, 1.0));
  for (std::size_t i = 5; i < 30; ++i) CHECK(ones[i] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("convolution matches a direct double sum") {
  for (int origin : {0, 2}) {
    DeconvKernel k;
    k.samples = random_vector(9, 17);
    k.origin_index = origin;
    const auto f = random_vector(64, 18);
    std::vector<double> ref(f.size(), 0.0);
    for (std::size_t out = 0; out < f.size(); ++out)
      for (std::size_t j = 0; j < f.size(); ++j) {
        const long m = static_cast<long>(out) - static_cast<long>(j) + origin;
        if (m >= 0 && m < static_cast<long>(k.samples.size())) ref[out] += k.samples[static_cast<std::size_t>(m)] * f[j];
      }
    const auto got = apply_operator(k, f);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(got[i] - ref[i]) <= 1e-12 * (1.0 + std::abs(ref[i])));
  }
}

TEST_CASE("adjoint satisfies <Hf, g> = <f, H'g>") {
  DeconvKernel k;
  k.samples = random_vector(7, 3);
  k.origin_index = 1;
  const auto f = random_vector(50, 4), g = random_vector(50, 5);
  const auto hf = apply_operator(k, f), htg = apply_adjoint(k, g);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    a += hf[i] * g[i];
    b += f[i] * htg[i];
  }
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("mu = 0 with the identity kernel returns the data") {
  DeconvKernel k;
  k.samples = {1.0};
  const auto g = random_vector(120, 9);
  const RecoveredProfile r = TvDeconvolver(k, g.size(), DeconvConfig{0.0, 2000, 1e-12}).solve(g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(r.samples[i] - g[i]) <= 1e-8);
}

TEST_CASE("mu = 0 solves the normal equations") {
  const DeconvKernel k = rectangle(4);
  const auto g = random_vector(100, 21);
  const RecoveredProfile r = TvDeconvolver(k, g.size(), DeconvConfig{0.0, 20000, 1e-13}).solve(g);
  auto res = apply_operator(k, r.samples);
  for (std::size_t i = 0; i < res.size(); ++i) res[i] -= g[i];
  const auto grad = apply_adjoint(k, res), htg = apply_adjoint(k, g);
  double gmax = 0.0, hmax = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    gmax = std::max(gmax, std::abs(grad[i]));
    hmax = std::max(hmax, std::abs(htg[i]));
  }
  CHECK(gmax <= 1e-6 * hmax);
}

TEST_CASE("noiseless step through a 20-sample rectangle") {
  const DeconvKernel k = rectangle(20);
  const std::vector<double> truth = step_profile(300, 120);
  const auto g = apply_operator(k, truth);
  const RecoveredProfile r = TvDeconvolver(k, g.size(), DeconvConfig{1e-3, 5000, 1e-10}).solve(g);
  std::size_t edge = 0;
  for (std::size_t i = 1; i < r.samples.size(); ++i)
    if (r.samples[i] >= 0.5 && r.samples[i - 1] < 0.5) {
      edge = i;
      break;
    }
  CHECK(std::abs(static_cast<long>(edge) - 120) <= 1);
  for (std::size_t i = 140; i < 240; ++i) CHECK(std::abs(r.samples[i] - 1.0) < 0.01);
}

TEST_CASE("objective history is non-increasing and the result beats the truth") {
  const DeconvKernel k = rectangle(20);
  std::vector<double> g = apply_operator(k, step_profile(300, 120));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.05);
  for (double& x : g) x += n(rng);
  DeconvConfig cfg{0.05, 3000, 1e-9};
  cfg.record_objective = true;
  const RecoveredProfile r = TvDeconvolver(k, g.size(), cfg).solve(g);
  REQUIRE(r.objective_history.size() >= 2);
  for (std::size_t i = 1; i < r.objective_history.size(); ++i)
    CHECK(r.objective_history[i] <= r.objective_history[i - 1] * (1.0 + 1e-9));
  CHECK(tv_objective(k, r.samples, g, cfg.mu) <= tv_objective(k, step_profile(300, 120), g, cfg.mu));
}

TEST_CASE("solution TV decreases as mu grows") {
  const DeconvKernel k = rectangle(20);
  std::vector<double> g = apply_operator(k, step_profile(300, 120));
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.05);
  for (double& x : g) x += n(rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double mu : {1e-3, 1e-2, 0.1, 1.0}) {
    const RecoveredProfile r = TvDeconvolver(k, g.size(), DeconvConfig{mu, 5000, 1e-10}).solve(g);
    const double tv = tv_norm(r.samples);
    CHECK(tv <= prev * (1.0 + 1e-3));
    prev = tv;
  }
}

TEST_CASE("recovery is shift equivariant") {
  const DeconvKernel k = rectangle(10);
  std::vector<double> f(300, 0.0);
  for (std::size_t i = 100; i < 130; ++i) f[i] = 1.0;
  for (std::size_t i = 160; i < 165; ++i) f[i] = -0.5;
  std::vector<double> fs(300, 0.0);
  for (std::size_t i = 0; i + 17 < 300; ++i) fs[i + 17] = f[i];
  const TvDeconvolver solver(k, 300, DeconvConfig{1e-2, 20000, 1e-13});
  const RecoveredProfile a = solver.solve(apply_operator(k, f));
  const RecoveredProfile b = solver.solve(apply_operator(k, fs));
  for (std::size_t i = 60; i < 220; ++i) CHECK(std::abs(b.samples[i + 17] - a.samples[i]) <= 1e-4);
}

TEST_CASE("map deconvolution equals per-channel deconvolution") {
  const FiberProfile fiber(10.0, 10.8e9, {{4.0, 1.0, 10.83e9}});
  const SamplingGrid grid{1e-9, kDefaultGroupVelocity, 221, -60e-9};
  const PulseScheme pair = PulseScheme::pair(60e-9, 40e-9);
  const BgsMap map = simulate_bgs(fiber, pair, {10.78e9, 5e6, 8}, grid, NoiseSpec{25.0, 3});
  const DeconvKernel k = dpp_kernel(pair, 27e6, grid);
  const DeconvConfig cfg{1e-3, 800, 1e-7};
  const RecoveredMap rec = tv_deconvolve(map, k, cfg);
  for (std::size_t c = 0; c < map.n_freqs(); ++c) {
    const RecoveredProfile one = tv_deconvolve(map.traces[c], k, cfg);
    CHECK(one.samples == rec.map.traces[c].samples);
  }
  CHECK(rec.map.meta().recovered);
}

TEST_CASE("kernel from another pulse scheme is refused") {
  const FiberProfile fiber(10.0, 10.8e9);
  const SamplingGrid grid{1e-9, kDefaultGroupVelocity, 221, -60e-9};
  const BgsMap map = simulate_bgs(fiber, PulseScheme::pair(60e-9, 40e-9), {10.78e9, 5e6, 4}, grid);
  const DeconvKernel other = dpp_kernel(PulseScheme::pair(80e-9, 60e-9), 27e6, grid);
  CHECK_THROWS_AS(tv_deconvolve(map, other, DeconvConfig{}), ContractError);
}

TEST_CASE("non-convergence is reported") {
  const DeconvKernel k = rectangle(20);
  const auto g = apply_operator(k, step_profile(300, 120));
  const RecoveredProfile r = TvDeconvolver(k, g.size(), DeconvConfig{1e-2, 3, 1e-14}).solve(g);
  CHECK_FALSE(r.diagnostics.converged);
  CHECK(r.diagnostics.iterations == 3);
}

TEST_CASE("solver config validation") {
  CHECK_THROWS(DeconvConfig{-1.0}.validate());
  CHECK_THROWS(DeconvConfig{1.0, 0}.validate());
  CHECK_THROWS(DeconvConfig{1.0, 10, 0.0}.validate());
}
