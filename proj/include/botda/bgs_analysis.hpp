#pragma once

// BFS extraction and the accuracy/SNR metrics used to judge a recovery.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "botda/core_model.hpp"
#include "botda/lorentzian.hpp"
#include "botda/snr.hpp"
#include "botda/trace.hpp"

namespace botda {

struct BfsPoint {
  double position_m = 0.0;
  double bfs_hz = 0.0;
  double peak_gain = 0.0;
  double fwhm_hz = 0.0;
  double fit_residual_rms = 0.0;
  bool fit_ok = false;
  std::string failure;
};

struct BfsProfile {
  std::vector<BfsPoint> points;

  std::size_t failures() const;
};

/// Half-open range of sample indices.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return size() == 0; }
};

/// Samples whose position lies in [z_lo_m, z_hi_m).
IndexRange range_for_positions(const SamplingGrid& grid, double z_lo_m, double z_hi_m);

/// Samples of a raw (not deconvolved) trace whose pulse sits entirely past
/// z_lo_m, i.e. fiber section [z_lo_m, z_hi_m) delayed by the long pulse width.
IndexRange raw_trace_range(const SamplingGrid& grid, const PulseScheme& pulse, double z_lo_m,
                           double z_hi_m);

/// Lorentzian fit at every time sample (or the given range) of the map.
BfsProfile bfs_profile(const BgsMap& map, std::optional<IndexRange> range = std::nullopt,
                       const LorentzianFitOptions& options = {});

/// Mean BFS / gain / FWHM over realizations; a position whose fits all failed
/// keeps a failure marker. Profiles must share positions.
BfsProfile average_profiles(std::span<const BfsProfile> profiles);

enum class SnrMode { Oracle, Blind };

struct SnrEstimate {
  double snr_db = 0.0;
  double noise_std = 0.0;
  double amplitude = 0.0;
  SnrMode mode = SnrMode::Oracle;
  SnrConvention convention = SnrConvention::Amplitude;
};

/// SNR of plateau / noise over `section`, in dB per `convention`. Oracle: noise
/// is the rms of (trace - noiseless) and plateau is the mean noiseless level.
/// Sections shorter than 3 kernel lengths are rejected with DomainError.
SnrEstimate snr_oracle(std::span<const double> trace, std::span<const double> noiseless,
                       IndexRange section, std::size_t kernel_length,
                       SnrConvention convention = SnrConvention::Amplitude);

/// Oracle SNR pooled over several noisy realizations of the same noiseless trace.
SnrEstimate snr_oracle_pooled(std::span<const std::vector<double>> traces,
                              std::span<const double> noiseless, IndexRange section,
                              std::size_t kernel_length,
                              SnrConvention convention = SnrConvention::Amplitude);

/// Blind SNR: noise from (trace - centered moving average of one kernel
/// length), corrected for the detrender's high-pass gain; plateau from the mean.
SnrEstimate snr_blind(std::span<const double> trace, IndexRange section, std::size_t kernel_length,
                      SnrConvention convention = SnrConvention::Amplitude);

/// Truth BFS of the hotspot minus the mean recovered BFS over its central
/// third (positive = under-recovery). DomainError if the hotspot spans fewer
/// than 3 samples of the profile.
double bfs_degradation(const BfsProfile& recovered, const FiberProfile& truth,
                       std::size_t hotspot_id);

/// max |recovered - truth| over positions in [z_lo_m, z_hi_m).
double max_systematic_error(const BfsProfile& recovered, const FiberProfile& truth, double z_lo_m,
                            double z_hi_m);

/// Max systematic error over the `length_m` before every hotspot (clipped to
/// the fiber and to the previous hotspot's end).
double max_pre_hotspot_error(const BfsProfile& recovered, const FiberProfile& truth,
                             double length_m);

struct HotspotDegradation {
  std::size_t hotspot_id = 0;
  double degradation_hz = 0.0;
};

struct MetricsReport {
  /// Oracle SNR only exists when a noiseless reference was supplied.
  std::optional<double> snr_oracle_db;
  std::optional<double> snr_blind_db;
  std::optional<double> max_systematic_error_hz;
  std::vector<HotspotDegradation> hotspot_degradations;
  std::size_t fit_failures = 0;
  SnrConvention snr_convention = SnrConvention::Amplitude;
};

}  // namespace botda
