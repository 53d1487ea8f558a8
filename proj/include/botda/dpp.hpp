#pragma once

// Differential pulse-width pair (DPP) processing. Subtracting the short-pulse
// trace from the long-pulse trace removes the detuning-dependent leading head
// of the temporal envelope, which is what lets a single peak-frequency kernel
// describe every frequency channel.

#include <complex>
#include <cstddef>
#include <vector>

#include "botda/core_model.hpp"
#include "botda/trace.hpp"

namespace botda {

enum class KernelSampling {
  /// Envelope value at t = m * dt.
  Point,
  /// Envelope averaged over ((m-1) dt, m dt]; exact for sample-aligned sections.
  CellAverage,
};

struct KernelSource {
  PulseScheme pulse;
  double linewidth_hz = kDefaultLinewidthHz;
  KernelSampling sampling = KernelSampling::Point;

  bool operator==(const KernelSource&) const = default;
};

/// Discretized convolution operator. A unit impulse at index j of the
/// high-resolution profile contributes samples[m] at output index j + m - origin_index.
struct DeconvKernel {
  std::vector<double> samples;
  double dt_s = 1e-9;
  int origin_index = 0;
  KernelSource source;
  /// Sum of the samples before unit-sum normalization.
  double raw_sum = 1.0;

  std::size_t first_nonzero() const;
  std::size_t last_nonzero() const;
  /// Number of samples between the first and last nonzero tap, inclusive.
  std::size_t support_length() const { return last_nonzero() - first_nonzero() + 1; }
  /// Offset (in samples) between a recovered sample index and the fiber cell it
  /// represents: 0 for Point, 0.5 for CellAverage.
  double position_offset_samples() const;
};

struct KernelOptions {
  bool allow_short_pair = false;
  KernelSampling sampling = KernelSampling::Point;
};

/// Smallest short width for which the leading head has settled: 1.08 / linewidth
/// (40 ns at 27 MHz).
double min_pair_short_width_s(double linewidth_hz);

/// ValidationError when a pair's short width is below min_pair_short_width_s
/// and the override is off. Single pulses always pass.
void check_pair_widths(const PulseScheme& pair, double linewidth_hz, bool allow_short_pair);

/// 2 exp(-pi dnu_B T): worst-case envelope mismatch after T seconds.
double cancellation_bound(double width_s, double linewidth_hz);

/// envelope(T_long) - envelope(T_short) at time t.
std::complex<double> pair_envelope(const ComplexRate& gamma, const PulseScheme& pair, double t_s);

/// Samplewise long - short; both inputs must share grid and probe offset.
GainTrace differential_trace(const GainTrace& long_trace, const GainTrace& short_trace);

/// Map-level differential (channel by channel).
BgsMap differential_map(const BgsMap& long_map, const BgsMap& short_map);

/// Unit-sum kernel from the pair envelope at the BGS peak. Throws
/// ValidationError when the short width is below min_pair_short_width_s and
/// the override is not set.
DeconvKernel dpp_kernel(const PulseScheme& pair, double linewidth_hz, const SamplingGrid& grid,
                        const KernelOptions& options = {});

/// Peak-frequency kernel for either scheme (single pulses are not guarded).
DeconvKernel peak_envelope_kernel(const PulseScheme& pulse, double linewidth_hz,
                                  const SamplingGrid& grid,
                                  KernelSampling sampling = KernelSampling::Point);

/// Same as peak_envelope_kernel but without unit-sum normalization.
std::vector<double> raw_peak_envelope_samples(const PulseScheme& pulse, double linewidth_hz,
                                              const SamplingGrid& grid, KernelSampling sampling);

}  // namespace botda
