#include "botda/bgs_analysis.hpp"

#include <algorithm>
#include <cmath>

#include "botda/errors.hpp"
#include "botda/parallel.hpp"

namespace botda {

std::size_t BfsProfile::failures() const {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const BfsPoint& p) { return !p.fit_ok; }));
}

IndexRange range_for_positions(const SamplingGrid& grid, double z_lo_m, double z_hi_m) {
  IndexRange r{grid.n_samples, grid.n_samples};
  for (std::size_t k = 0; k < grid.n_samples; ++k) {
    const double z = grid.position_at(k);
    if (z >= z_lo_m && z < z_hi_m) {
      if (r.begin == grid.n_samples) r.begin = k;
      r.end = k + 1;
    }
  }
  if (r.begin == grid.n_samples) return {0, 0};
  return r;
}

IndexRange raw_trace_range(const SamplingGrid& grid, const PulseScheme& pulse, double z_lo_m,
                           double z_hi_m) {
  const double delay_m = grid.group_velocity_m_per_s * pulse.width_long_s / 2.0;
  return range_for_positions(grid, z_lo_m + delay_m, z_hi_m + delay_m);
}

BfsProfile bfs_profile(const BgsMap& map, std::optional<IndexRange> range,
                       const LorentzianFitOptions& options) {
  map.validate();
  const IndexRange r = range.value_or(IndexRange{0, map.n_samples()});
  if (r.end > map.n_samples()) throw DomainError("profile range exceeds the map");
  const std::vector<double> freqs = map.frequencies();
  BfsProfile out;
  out.points.resize(r.size());
  parallel_for(r.size(), [&](std::size_t i) {
    const std::size_t k = r.begin + i;
    const std::vector<double> spectrum = map.spectrum_at(k);
    const LorentzianFit fit = fit_lorentzian(freqs, spectrum, options);
    BfsPoint& p = out.points[i];
    p.position_m = map.grid().position_at(k);
    p.fit_ok = fit.ok;
    p.failure = fit.failure;
    if (fit.ok) {
      p.bfs_hz = fit.bfs_hz;
      p.peak_gain = fit.peak_gain;
      p.fwhm_hz = fit.fwhm_hz;
      p.fit_residual_rms = fit.residual_rms;
    }
  });
  return out;
}

BfsProfile average_profiles(std::span<const BfsProfile> profiles) {
  if (profiles.empty()) throw DomainError("nothing to average");
  const std::size_t n = profiles.front().points.size();
  BfsProfile out;
  out.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    BfsPoint& acc = out.points[i];
    acc.position_m = profiles.front().points[i].position_m;
    std::size_t ok = 0;
    for (const BfsProfile& p : profiles) {
      if (p.points.size() != n) throw ContractError("profiles have different lengths");
      const BfsPoint& q = p.points[i];
      if (!q.fit_ok) continue;
      ++ok;
      acc.bfs_hz += q.bfs_hz;
      acc.peak_gain += q.peak_gain;
      acc.fwhm_hz += q.fwhm_hz;
      acc.fit_residual_rms += q.fit_residual_rms;
    }
    if (ok == 0) {
      acc = BfsPoint{acc.position_m, 0.0, 0.0, 0.0, 0.0, false, "every realization failed"};
      continue;
    }
    const auto c = static_cast<double>(ok);
    acc.bfs_hz /= c;
    acc.peak_gain /= c;
    acc.fwhm_hz /= c;
    acc.fit_residual_rms /= c;
    acc.fit_ok = true;
  }
  return out;
}

namespace {

void check_section(std::size_t trace_size, IndexRange section, std::size_t kernel_length) {
  if (section.end > trace_size) throw DomainError("SNR section exceeds the trace");
  if (section.size() < 3 * std::max<std::size_t>(kernel_length, 1))
    throw DomainError("SNR reference section must span at least 3 kernel lengths (" +
                      std::to_string(3 * kernel_length) + " samples), got " +
                      std::to_string(section.size()));
}

SnrEstimate make_estimate(double amplitude, double noise, SnrMode mode, SnrConvention convention) {
  SnrEstimate e;
  e.mode = mode;
  e.convention = convention;
  e.amplitude = amplitude;
  e.noise_std = noise;
  e.snr_db = noise > 0.0 ? snr_ratio_to_db(std::abs(amplitude) / noise, convention)
                         : std::numeric_limits<double>::infinity();
  return e;
}

}  // namespace

SnrEstimate snr_oracle(std::span<const double> trace, std::span<const double> noiseless,
                       IndexRange section, std::size_t kernel_length, SnrConvention convention) {
  std::vector<double> one(trace.begin(), trace.end());
  return snr_oracle_pooled(std::span<const std::vector<double>>(&one, 1), noiseless, section,
                           kernel_length, convention);
}

SnrEstimate snr_oracle_pooled(std::span<const std::vector<double>> traces,
                              std::span<const double> noiseless, IndexRange section,
                              std::size_t kernel_length, SnrConvention convention) {
  if (traces.empty()) throw DomainError("no traces to measure");
  check_section(noiseless.size(), section, kernel_length);
  double amplitude = 0.0;
  for (std::size_t k = section.begin; k < section.end; ++k) amplitude += noiseless[k];
  amplitude /= static_cast<double>(section.size());
  double sq = 0.0;
  for (const std::vector<double>& t : traces) {
    if (t.size() != noiseless.size()) throw ContractError("trace and reference lengths differ");
    for (std::size_t k = section.begin; k < section.end; ++k) {
      const double d = t[k] - noiseless[k];
      sq += d * d;
    }
  }
  const double noise =
      std::sqrt(sq / static_cast<double>(section.size() * traces.size()));
  return make_estimate(amplitude, noise, SnrMode::Oracle, convention);
}

SnrEstimate snr_blind(std::span<const double> trace, IndexRange section, std::size_t kernel_length,
                      SnrConvention convention) {
  check_section(trace.size(), section, kernel_length);
  const std::size_t window = std::max<std::size_t>(kernel_length, 1) | 1U;  // odd, centered
  const std::size_t half = window / 2;
  double amplitude = 0.0;
  for (std::size_t k = section.begin; k < section.end; ++k) amplitude += trace[k];
  amplitude /= static_cast<double>(section.size());

  double sum = 0.0;
  for (std::size_t k = section.begin; k < section.begin + window; ++k) sum += trace[k];
  double sq = 0.0, mean_res = 0.0;
  std::size_t count = 0;
  std::vector<double> residuals;
  for (std::size_t c = section.begin + half; c + half < section.end; ++c) {
    if (c > section.begin + half) sum += trace[c + half] - trace[c - half - 1];
    const double r = trace[c] - sum / static_cast<double>(window);
    residuals.push_back(r);
    mean_res += r;
    ++count;
  }
  mean_res /= static_cast<double>(count);
  for (double r : residuals) sq += (r - mean_res) * (r - mean_res);
  // For white noise, x - mean_w(x) has variance sigma^2 (1 - 1/w).
  const double gain = 1.0 - 1.0 / static_cast<double>(window);
  const double noise = std::sqrt(sq / static_cast<double>(count - 1) / gain);
  return make_estimate(amplitude, noise, SnrMode::Blind, convention);
}

double bfs_degradation(const BfsProfile& recovered, const FiberProfile& truth,
                       std::size_t hotspot_id) {
  if (hotspot_id >= truth.hotspots().size()) throw DomainError("no such hotspot");
  if (recovered.points.size() < 2) throw DomainError("profile too short");
  const Hotspot& h = truth.hotspots()[hotspot_id];
  const double spacing = std::abs(recovered.points[1].position_m - recovered.points[0].position_m);
  // Sub-3-sample hotspots are still scored (down to two samples) because the
  // sampling-rate study needs 0.5 m at 0.2 m spacing.
  if (h.length_m < 2.0 * spacing * (1.0 - 1e-9))
    throw DomainError("hotspot spans fewer than 2 profile samples");
  const double lo = h.start_m + h.length_m / 3.0;
  const double hi = h.start_m + 2.0 * h.length_m / 3.0;
  const double center = h.start_m + 0.5 * h.length_m;
  double sum = 0.0;
  std::size_t count = 0;
  const BfsPoint* nearest = nullptr;
  for (const BfsPoint& p : recovered.points) {
    if (!nearest || std::abs(p.position_m - center) < std::abs(nearest->position_m - center))
      nearest = &p;
    if (p.position_m < lo - 1e-9 || p.position_m > hi + 1e-9) continue;
    if (!p.fit_ok) throw DomainError("fit failed inside the hotspot at " + std::to_string(p.position_m) + " m");
    sum += p.bfs_hz;
    ++count;
  }
  if (count == 0) {
    if (!nearest->fit_ok) throw DomainError("fit failed at the hotspot center");
    return h.bfs_hz - nearest->bfs_hz;
  }
  return h.bfs_hz - sum / static_cast<double>(count);
}

double max_systematic_error(const BfsProfile& recovered, const FiberProfile& truth, double z_lo_m,
                            double z_hi_m) {
  double worst = -1.0;
  for (const BfsPoint& p : recovered.points) {
    if (p.position_m < z_lo_m || p.position_m >= z_hi_m) continue;
    if (!p.fit_ok) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::abs(p.bfs_hz - truth.bfs_at(p.position_m)));
  }
  if (worst < 0.0) throw DomainError("empty region for systematic error");
  return worst;
}

double max_pre_hotspot_error(const BfsProfile& recovered, const FiberProfile& truth,
                             double length_m) {
  double worst = 0.0;
  double previous_end = 0.0;
  for (const Hotspot& h : truth.hotspots()) {
    const double lo = std::max(previous_end, h.start_m - length_m);
    if (h.start_m > lo) worst = std::max(worst, max_systematic_error(recovered, truth, lo, h.start_m));
    previous_end = h.end_m();
  }
  return worst;
}

}  // namespace botda
