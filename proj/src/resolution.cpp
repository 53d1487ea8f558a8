#include "botda/resolution.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "botda/errors.hpp"
#include "botda/parallel.hpp"
#include "botda/simulator.hpp"

namespace botda {

namespace {

std::size_t nearest_channel(const FrequencySweep& sweep, double nu_hz) {
  const double idx = std::round((nu_hz - sweep.start_hz) / sweep.step_hz);
  return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(sweep.count - 1)));
}

// Per-realization recovered traces for one mu.
struct MonteCarloRun {
  std::vector<std::vector<double>> clean;                // [channel]
  std::vector<std::vector<std::vector<double>>> noisy;   // [realization][channel]
  std::size_t unconverged = 0;
  double mean_iterations = 0.0;
};

BfsProfile fit_range(const std::vector<std::vector<double>>& channels, const FrequencySweep& sweep,
                     const SamplingGrid& grid, IndexRange range) {
  const std::vector<double> freqs = [&] {
    std::vector<double> f(sweep.count);
    for (std::size_t i = 0; i < sweep.count; ++i) f[i] = sweep.at(i);
    return f;
  }();
  BfsProfile out;
  out.points.resize(range.size());
  std::vector<double> spectrum(channels.size());
  for (std::size_t i = 0; i < range.size(); ++i) {
    const std::size_t k = range.begin + i;
    for (std::size_t c = 0; c < channels.size(); ++c) spectrum[c] = channels[c][k];
    const LorentzianFit fit = fit_lorentzian(freqs, spectrum);
    BfsPoint& p = out.points[i];
    p.position_m = grid.position_at(k);
    p.fit_ok = fit.ok;
    p.failure = fit.failure;
    if (fit.ok) {
      p.bfs_hz = fit.bfs_hz;
      p.peak_gain = fit.peak_gain;
      p.fwhm_hz = fit.fwhm_hz;
      p.fit_residual_rms = fit.residual_rms;
    }
  }
  return out;
}

// The lead-in before the pulse enters the fiber is all zeros and carries no
// information for the deconvolution, so the study grid starts at t = 0.
SamplingGrid study_grid(const ResolutionScenario& sc) {
  SamplingGrid g = SamplingGrid::covering(sc.fiber_length_m, sc.pulse.width_long_s, sc.sample_rate_hz);
  const auto lead = static_cast<std::size_t>(std::llround(-g.t0_s / g.dt_s));
  g.n_samples -= lead;
  g.t0_s = 0.0;
  return g;
}

}  // namespace

void ResolutionScenario::validate() const {
  if (!(fiber_length_m > 0.0)) throw DomainError("fiber length must be positive");
  if (!(reference_lo_m >= 0.0 && reference_hi_m > reference_lo_m &&
        reference_hi_m + pulse.effective_resolution_m() <= hotspot_start_m + 1e-9))
    throw DomainError("reference section must be a non-empty range before the hotspot");
  if (pulse.kind != PulseKind::Pair) throw DomainError("the resolution study needs a pulse pair");
  pulse.validate();
  if (!(sample_rate_hz > 0.0)) throw DomainError("sample rate must be positive");
  if (sweep.count < 7) throw DomainError("sweep needs at least 7 channels");
  if (realizations < 1) throw DomainError("need at least one realization");
  if (!(mu_min > 0.0 && mu_max > mu_min)) throw DomainError("bad mu search bounds");
  solver.validate();
}

std::string to_string(MuSearchStatus s) {
  switch (s) {
    case MuSearchStatus::Converged: return "converged";
    case MuSearchStatus::SaturatedHigh: return "saturated at the upper mu bound";
    case MuSearchStatus::Unreachable: return "unreachable within the mu bounds";
    case MuSearchStatus::NotConverged: return "search did not converge";
  }
  return "unknown";
}

HotspotStudy::HotspotStudy(ResolutionScenario scenario, double hotspot_length_m)
    : scenario_(std::move(scenario)),
      hotspot_length_m_(hotspot_length_m),
      fiber_(scenario_.fiber_length_m, scenario_.base_bfs_hz,
             {Hotspot{scenario_.hotspot_start_m, hotspot_length_m,
                      scenario_.base_bfs_hz + scenario_.hotspot_shift_hz}},
             scenario_.linewidth_hz),
      grid_(study_grid(scenario_)),
      kernel_(dpp_kernel(scenario_.pulse, scenario_.linewidth_hz, grid_,
                         KernelOptions{false, scenario_.sampling})),
      solver_(kernel_, grid_.n_samples, scenario_.solver) {
  scenario_.validate();
  out_grid_ = recovered_grid(grid_, kernel_);
  clean_.resize(scenario_.sweep.count);
  const SamplingGrid full = SamplingGrid::covering(scenario_.fiber_length_m,
                                                   scenario_.pulse.width_long_s, scenario_.sample_rate_hz);
  const auto lead = static_cast<std::size_t>(std::llround(-full.t0_s / full.dt_s));
  parallel_for(scenario_.sweep.count, [&](std::size_t c) {
    const std::vector<double> t =
        simulate_normalized_trace(fiber_, scenario_.pulse, scenario_.sweep.at(c), full).samples;
    clean_[c].assign(t.begin() + static_cast<std::ptrdiff_t>(lead), t.end());
  });
  peak_channel_ = nearest_channel(scenario_.sweep, scenario_.base_bfs_hz);
}

std::vector<double> HotspotStudy::noisy_channel(std::size_t realization, std::size_t channel) const {
  GainTrace t;
  t.samples = clean_[channel];
  t.grid = grid_;
  const std::uint64_t seed = derive_seed(derive_seed(scenario_.seed, realization), channel);
  return add_noise(std::move(t), NoiseSpec{scenario_.input_snr_db, seed, scenario_.snr_convention}, 1.0).samples;
}

IndexRange HotspotStudy::reference_range() const {
  return range_for_positions(out_grid_, scenario_.reference_lo_m, scenario_.reference_hi_m);
}

namespace {

MonteCarloRun run(const TvDeconvolver& solver, const std::vector<std::vector<double>>& clean,
                  std::span<const std::size_t> channels, int realizations,
                  const std::function<std::vector<double>(std::size_t, std::size_t)>& noisy_of) {
  MonteCarloRun out;
  out.clean.resize(clean.size());
  std::vector<AdmmState> states(clean.size());
  std::vector<int> unconverged(channels.size() * (static_cast<std::size_t>(realizations) + 1), 0);
  std::vector<int> iterations(unconverged.size(), 0);
  parallel_for(channels.size(), [&](std::size_t i) {
    const std::size_t c = channels[i];
    RecoveredProfile r = solver.solve(clean[c], &states[c]);
    unconverged[i] = r.diagnostics.converged ? 0 : 1;
    iterations[i] = r.diagnostics.iterations;
    out.clean[c] = std::move(r.samples);
  });
  out.noisy.assign(static_cast<std::size_t>(realizations), std::vector<std::vector<double>>(clean.size()));
  const std::size_t jobs = static_cast<std::size_t>(realizations) * channels.size();
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t r = job / channels.size();
    const std::size_t i = job % channels.size();
    const std::size_t c = channels[i];
    AdmmState warm = states[c];
    RecoveredProfile rec = solver.solve(noisy_of(r, c), &warm);
    unconverged[channels.size() + job] = rec.diagnostics.converged ? 0 : 1;
    iterations[channels.size() + job] = rec.diagnostics.iterations;
    out.noisy[r][c] = std::move(rec.samples);
  });
  for (int u : unconverged) out.unconverged += static_cast<std::size_t>(u);
  double total = 0.0;
  for (int it : iterations) total += it;
  out.mean_iterations = total / static_cast<double>(iterations.size());
  return out;
}

}  // namespace

double HotspotStudy::noiseless_degradation(double mu) const {
  const TvDeconvolver solver = solver_.with_mu(mu);
  std::vector<std::vector<double>> rec(clean_.size());
  parallel_for(clean_.size(), [&](std::size_t c) { rec[c] = solver.solve(clean_[c]).samples; });
  const double margin = 1.0;
  const IndexRange range = range_for_positions(out_grid_, scenario_.hotspot_start_m - margin,
                                               scenario_.hotspot_start_m + hotspot_length_m_ + margin);
  return bfs_degradation(fit_range(rec, scenario_.sweep, out_grid_, range), fiber_, 0);
}

MuEvaluation HotspotStudy::evaluate(double mu) const {
  const TvDeconvolver solver = solver_.with_mu(mu);
  std::vector<std::size_t> channels(clean_.size());
  for (std::size_t c = 0; c < channels.size(); ++c) channels[c] = c;
  const MonteCarloRun mc = run(solver, clean_, channels, scenario_.realizations,
                               [this](std::size_t r, std::size_t c) { return noisy_channel(r, c); });

  const double margin = 1.0;
  const IndexRange range = range_for_positions(out_grid_, scenario_.hotspot_start_m - margin,
                                               scenario_.hotspot_start_m + hotspot_length_m_ + margin);
  std::vector<BfsProfile> profiles(mc.noisy.size());
  parallel_for(mc.noisy.size(), [&](std::size_t r) {
    profiles[r] = fit_range(mc.noisy[r], scenario_.sweep, out_grid_, range);
  });
  MuEvaluation e;
  e.mu = mu;
  for (const BfsProfile& p : profiles) e.fit_failures += p.failures();
  e.averaged_profile = average_profiles(profiles);
  e.degradation_hz = bfs_degradation(e.averaged_profile, fiber_, 0);

  std::vector<std::vector<double>> peak;
  peak.reserve(mc.noisy.size());
  for (const auto& r : mc.noisy) peak.push_back(r[peak_channel_]);
  e.snr_db = snr_oracle_pooled(peak, mc.clean[peak_channel_], reference_range(),
                               kernel_.support_length(), scenario_.snr_convention)
                 .snr_db;
  e.unconverged_solves = mc.unconverged;
  e.mean_iterations = mc.mean_iterations;
  return e;
}

double HotspotStudy::recovered_snr_db(double mu) const {
  const TvDeconvolver solver = solver_.with_mu(mu);
  const std::size_t channels[] = {peak_channel_};
  const MonteCarloRun mc = run(solver, clean_, channels, scenario_.realizations,
                               [this](std::size_t r, std::size_t c) { return noisy_channel(r, c); });
  std::vector<std::vector<double>> peak;
  for (const auto& r : mc.noisy) peak.push_back(r[peak_channel_]);
  return snr_oracle_pooled(peak, mc.clean[peak_channel_], reference_range(), kernel_.support_length(),
                           scenario_.snr_convention)
      .snr_db;
}

double HotspotStudy::input_snr_db() const {
  std::vector<std::vector<double>> traces;
  for (int r = 0; r < scenario_.realizations; ++r)
    traces.push_back(noisy_channel(static_cast<std::size_t>(r), peak_channel_));
  const IndexRange ref =
      raw_trace_range(grid_, scenario_.pulse, scenario_.reference_lo_m, scenario_.reference_hi_m);
  return snr_oracle_pooled(traces, clean_[peak_channel_], ref, kernel_.support_length(),
                           scenario_.snr_convention)
      .snr_db;
}

BfsProfile HotspotStudy::averaged_profile(double mu) const {
  const TvDeconvolver solver = solver_.with_mu(mu);
  std::vector<std::size_t> channels(clean_.size());
  for (std::size_t c = 0; c < channels.size(); ++c) channels[c] = c;
  const MonteCarloRun mc = run(solver, clean_, channels, scenario_.realizations,
                               [this](std::size_t r, std::size_t c) { return noisy_channel(r, c); });
  const IndexRange all{0, out_grid_.n_samples};
  std::vector<BfsProfile> profiles(mc.noisy.size());
  parallel_for(mc.noisy.size(), [&](std::size_t r) {
    profiles[r] = fit_range(mc.noisy[r], scenario_.sweep, out_grid_, all);
  });
  return average_profiles(profiles);
}

namespace {

// Root of f(log mu) = 0 on [a, b] with f(a) < 0 < f(b), by bisection with an
// Illinois-style false-position step when the bracket is well behaved.
template <typename F, typename Done>
std::optional<double> log_bisect(F&& f, double lo, double f_lo, double hi, double f_hi, int budget,
                                 int& used, Done&& done) {
  double a = std::log(lo), b = std::log(hi);
  double fa = f_lo, fb = f_hi;
  int side = 0;
  while (used < budget) {
    double x = (a * fb - b * fa) / (fb - fa);
    // fall back to plain bisection when false position stalls at an end
    if (!(x > a + 0.05 * (b - a) && x < b - 0.05 * (b - a))) x = 0.5 * (a + b);
    const double fx = f(std::exp(x));
    ++used;
    if (done(std::exp(x))) return std::exp(x);
    if (fx < 0.0) {
      a = x;
      fa = fx;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = x;
      fb = fx;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
  }
  return std::nullopt;
}

}  // namespace

MuSearchResult search_mu_for_degradation(const HotspotStudy& study, double tolerance_hz,
                                         double rel_tol, int max_evaluations) {
  const ResolutionScenario& sc = study.scenario();
  MuSearchResult out;
  const double lo = sc.mu_min, hi = sc.mu_max;

  // Locate the noiseless root first; it is cheap and usually close.
  double guess;
  const double d_hi = study.noiseless_degradation(hi);
  if (!(d_hi >= tolerance_hz)) {
    out.status = MuSearchStatus::SaturatedHigh;
    out.best = study.evaluate(hi);
    out.evaluations = 1;
    return out;
  }
  {
    double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < 40 && b - a > 0.02; ++i) {
      const double m = 0.5 * (a + b);
      if (study.noiseless_degradation(std::exp(m)) < tolerance_hz) a = m;
      else b = m;
    }
    guess = std::exp(0.5 * (a + b));
  }

  std::optional<MuEvaluation> best;
  auto f = [&](double mu) {
    MuEvaluation e = study.evaluate(mu);
    if (!best || std::abs(e.degradation_hz - tolerance_hz) < std::abs(best->degradation_hz - tolerance_hz))
      best = e;
    return e.degradation_hz - tolerance_hz;
  };
  auto done = [&](double) {
    return best && std::abs(best->degradation_hz - tolerance_hz) <= rel_tol * std::abs(tolerance_hz);
  };

  int used = 0;
  double x0 = guess;
  double f0 = f(x0);
  ++used;
  if (done(x0)) {
    out.best = *best;
    out.status = MuSearchStatus::Converged;
    out.evaluations = used;
    return out;
  }
  // Expand geometrically away from the guess until the sign flips.
  double x1 = x0, f1 = f0;
  const double factor = 2.0;
  while (used < max_evaluations) {
    const double next = f0 < 0.0 ? std::min(x1 * factor, hi) : std::max(x1 / factor, lo);
    if (next == x1) break;
    x1 = next;
    f1 = f(x1);
    ++used;
    if (done(x1) || (f1 < 0.0) != (f0 < 0.0)) break;
    x0 = x1;
    f0 = f1;
  }
  if (!done(x1) && (f1 < 0.0) == (f0 < 0.0)) {
    out.best = *best;
    out.evaluations = used;
    out.status = f1 < 0.0 ? MuSearchStatus::SaturatedHigh : MuSearchStatus::Unreachable;
    if (used >= max_evaluations) out.status = MuSearchStatus::NotConverged;
    return out;
  }
  if (!done(x1)) {
    if (f0 < 0.0) log_bisect(f, x0, f0, x1, f1, max_evaluations, used, done);
    else log_bisect(f, x1, f1, x0, f0, max_evaluations, used, done);
  }
  out.best = *best;
  out.evaluations = used;
  out.status = done(0.0) ? MuSearchStatus::Converged : MuSearchStatus::NotConverged;
  return out;
}

MuSearchResult search_mu_for_snr(const HotspotStudy& study, double target_snr_db, double tol_db,
                                 int max_evaluations) {
  const ResolutionScenario& sc = study.scenario();
  MuSearchResult out;
  double a = std::log(sc.mu_min), b = std::log(sc.mu_max);
  double best_mu = sc.mu_min, best_snr = -std::numeric_limits<double>::infinity();
  int used = 0;
  const double s_hi = study.recovered_snr_db(sc.mu_max);
  ++used;
  if (s_hi < target_snr_db) {
    out.status = MuSearchStatus::Unreachable;
    out.best.mu = sc.mu_max;
    out.best.snr_db = s_hi;
    out.evaluations = used;
    return out;
  }
  const double s_lo = study.recovered_snr_db(sc.mu_min);
  ++used;
  if (s_lo > target_snr_db) {
    out.status = MuSearchStatus::SaturatedHigh;
    out.best.mu = sc.mu_min;
    out.best.snr_db = s_lo;
    out.evaluations = used;
    return out;
  }
  out.status = MuSearchStatus::NotConverged;
  while (used < max_evaluations) {
    const double m = 0.5 * (a + b);
    const double s = study.recovered_snr_db(std::exp(m));
    ++used;
    if (std::abs(s - target_snr_db) < std::abs(best_snr - target_snr_db)) {
      best_mu = std::exp(m);
      best_snr = s;
    }
    if (std::abs(s - target_snr_db) <= tol_db) {
      out.status = MuSearchStatus::Converged;
      break;
    }
    if (s < target_snr_db) a = m;
    else b = m;
  }
  out.best.mu = best_mu;
  out.best.snr_db = best_snr;
  out.evaluations = used;
  return out;
}

double dpp_baseline_snr_db(const ResolutionScenario& scenario, double resolution_m) {
  scenario.validate();
  const double v = kDefaultGroupVelocity;
  const double t_short = scenario.pulse.width_short_s;
  const PulseScheme conventional = PulseScheme::pair(t_short + 2.0 * resolution_m / v, t_short);
  const FiberProfile uniform(scenario.fiber_length_m, scenario.base_bfs_hz, {}, scenario.linewidth_hz);
  const SamplingGrid grid = SamplingGrid::covering(scenario.fiber_length_m,
                                                   conventional.width_long_s, scenario.sample_rate_hz);
  const GainTrace lng = simulate_trace(uniform, PulseScheme::single(conventional.width_long_s),
                                       scenario.base_bfs_hz, grid);
  const GainTrace shrt = simulate_trace(uniform, PulseScheme::single(t_short), scenario.base_bfs_hz, grid);
  GainTrace diff = differential_trace(lng, shrt);
  // Same detector noise as the scenario's pair, whose plateau sets the unit.
  const double unit = reference_plateau(scenario.pulse, scenario.linewidth_hz, 1.0, v);
  for (double& s : diff.samples) s /= unit;

  std::vector<std::vector<double>> traces(static_cast<std::size_t>(scenario.realizations));
  for (int r = 0; r < scenario.realizations; ++r) {
    const std::uint64_t seed = derive_seed(derive_seed(scenario.seed, static_cast<std::size_t>(r)), scenario.sweep.count);
    traces[static_cast<std::size_t>(r)] =
        add_noise(diff, NoiseSpec{scenario.input_snr_db, seed, scenario.snr_convention}, 1.0).samples;
  }
  const IndexRange ref =
      raw_trace_range(grid, conventional, scenario.reference_lo_m, scenario.reference_hi_m);
  const auto kernel_length = static_cast<std::size_t>(std::ceil(
      (scenario.pulse.width_long_s - scenario.pulse.width_short_s) * scenario.sample_rate_hz - 1e-9));
  return snr_oracle_pooled(traces, diff.samples, ref, kernel_length, scenario.snr_convention).snr_db;
}

std::vector<ResolutionPoint> find_spatial_resolution(const ResolutionScenario& scenario,
                                                     double tolerance_hz,
                                                     std::span<const double> hotspot_lengths_m) {
  std::vector<ResolutionPoint> out;
  for (double length : hotspot_lengths_m) {
    const HotspotStudy study(scenario, length);
    const MuSearchResult r = search_mu_for_degradation(study, tolerance_hz);
    ResolutionPoint p;
    p.hotspot_length_m = length;
    p.mu = r.best.mu;
    p.snr_db = r.best.snr_db;
    p.degradation_hz = r.best.degradation_hz;
    p.baseline_snr_db = dpp_baseline_snr_db(scenario, length);
    p.status = r.status;
    out.push_back(p);
  }
  return out;
}

}  // namespace botda
