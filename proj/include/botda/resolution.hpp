#pragma once

// Monte Carlo study of one hotspot: how far can mu be raised (SNR gained)
// before the averaged recovered BFS of the hotspot degrades by a given amount.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "botda/bgs_analysis.hpp"
#include "botda/dpp.hpp"
#include "botda/tv_deconv.hpp"

namespace botda {

struct ResolutionScenario {
  double fiber_length_m = 12.5;
  double base_bfs_hz = 10.8e9;
  double hotspot_shift_hz = 30e6;
  double hotspot_start_m = 9.5;
  /// Uniform section used for SNR, in fiber coordinates.
  double reference_lo_m = 1.0;
  double reference_hi_m = 7.5;
  double linewidth_hz = kDefaultLinewidthHz;
  PulseScheme pulse = PulseScheme::pair(60e-9, 40e-9);
  double sample_rate_hz = 1e9;
  FrequencySweep sweep{10.74e9, 4e6, 38};
  double input_snr_db = 23.0;
  /// Applies to the input noise level and to every reported SNR.
  SnrConvention snr_convention = SnrConvention::Amplitude;
  int realizations = 100;
  std::uint64_t seed = 1;
  KernelSampling sampling = KernelSampling::CellAverage;
  /// mu is overwritten by the search; the rest configures every solve.
  DeconvConfig solver{1e-3, 3000, 1e-5};
  double mu_min = 1e-4;
  double mu_max = 1e4;

  void validate() const;
};

struct MuEvaluation {
  double mu = 0.0;
  /// Truth minus averaged recovered BFS over the hotspot's central third.
  double degradation_hz = 0.0;
  /// Oracle SNR of the recovered peak-frequency trace over the reference section.
  double snr_db = 0.0;
  std::size_t fit_failures = 0;
  std::size_t unconverged_solves = 0;
  double mean_iterations = 0.0;
  /// Realization-averaged BFS profile over the hotspot +- 1 m.
  BfsProfile averaged_profile;
};

enum class MuSearchStatus { Converged, SaturatedHigh, Unreachable, NotConverged };

std::string to_string(MuSearchStatus s);

struct MuSearchResult {
  MuEvaluation best;
  MuSearchStatus status = MuSearchStatus::NotConverged;
  int evaluations = 0;
};

/// One hotspot length of the scenario, with everything noise-independent
/// precomputed. Noise for (realization, channel) is fixed by the seed, so every
/// mu sees the same realizations.
class HotspotStudy {
 public:
  HotspotStudy(ResolutionScenario scenario, double hotspot_length_m);

  const ResolutionScenario& scenario() const { return scenario_; }
  const FiberProfile& fiber() const { return fiber_; }
  double hotspot_length_m() const { return hotspot_length_m_; }
  const SamplingGrid& grid() const { return grid_; }
  const SamplingGrid& output_grid() const { return out_grid_; }
  std::size_t peak_channel() const { return peak_channel_; }

  /// Degradation of the noiseless recovery (no Monte Carlo).
  double noiseless_degradation(double mu) const;

  /// Full Monte Carlo: degradation of the averaged profile and recovered SNR.
  MuEvaluation evaluate(double mu) const;

  /// Monte Carlo SNR of the recovered peak-frequency trace only.
  double recovered_snr_db(double mu) const;

  /// Realization-averaged BFS profile over the whole fiber at this mu.
  BfsProfile averaged_profile(double mu) const;

  /// Oracle SNR of the un-deconvolved input trace at the peak frequency.
  double input_snr_db() const;

 private:
  std::vector<double> noisy_channel(std::size_t realization, std::size_t channel) const;
  IndexRange reference_range() const;

  ResolutionScenario scenario_;
  double hotspot_length_m_;
  FiberProfile fiber_;
  SamplingGrid grid_;
  SamplingGrid out_grid_;
  DeconvKernel kernel_;
  TvDeconvolver solver_;
  std::vector<std::vector<double>> clean_;
  std::size_t peak_channel_ = 0;
};

/// Safeguarded bisection on log mu until the degradation is within `rel_tol`
/// of the tolerance. The noiseless degradation brackets the root first.
MuSearchResult search_mu_for_degradation(const HotspotStudy& study, double tolerance_hz,
                                         double rel_tol = 0.05, int max_evaluations = 14);

/// Bisection on log mu until the recovered SNR is within `tol_db` of the target.
MuSearchResult search_mu_for_snr(const HotspotStudy& study, double target_snr_db,
                                 double tol_db = 0.05, int max_evaluations = 30);

/// Oracle SNR of a conventional pulse pair whose width difference gives
/// `resolution_m`, with the same noise level as the scenario's input.
double dpp_baseline_snr_db(const ResolutionScenario& scenario, double resolution_m);

struct ResolutionPoint {
  double hotspot_length_m = 0.0;
  double mu = 0.0;
  double snr_db = 0.0;
  double degradation_hz = 0.0;
  double baseline_snr_db = 0.0;
  MuSearchStatus status = MuSearchStatus::NotConverged;

  double improvement_db() const { return snr_db - baseline_snr_db; }
};

/// For each hotspot length, the mu whose degradation equals the tolerance and
/// the resulting SNR next to the matched-resolution DPP baseline.
std::vector<ResolutionPoint> find_spatial_resolution(const ResolutionScenario& scenario,
                                                     double tolerance_hz,
                                                     std::span<const double> hotspot_lengths_m);

}  // namespace botda
