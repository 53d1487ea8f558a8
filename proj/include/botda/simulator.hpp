#pragma once

// Synthesis of detected BOTDA gain traces. The received signal is the weighted
// spatial integral of envelope x impulse response; for a piecewise-constant
// fiber every constant section integrates in closed form, so traces are exact
// samples of the continuous model rather than a quadrature of it.

#include <cstdint>
#include <limits>
#include <optional>

#include "botda/core_model.hpp"
#include "botda/snr.hpp"
#include "botda/trace.hpp"

namespace botda {

struct NoiseSpec {
  /// Amplitude SNR in dB; +infinity means no noise.
  double target_snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  SnrConvention convention = SnrConvention::Amplitude;
};

/// Raw (un-normalized) trace for one pulse width. Accepts Single schemes only.
GainTrace simulate_trace(const FiberProfile& fiber, const PulseScheme& pulse,
                         double probe_offset_hz, const SamplingGrid& grid);

/// Steady-state plateau of a raw trace for a uniform fiber probed at its own
/// BFS. For Pair schemes this is the long minus short plateau.
double reference_plateau(const PulseScheme& pulse, double linewidth_hz, double gain_scale,
                         double group_velocity_m_per_s);

/// Divide by the zero-detuning plateau of `fiber` so that plateau equals 1.
GainTrace normalize_trace(GainTrace trace, const FiberProfile& fiber);

/// Normalized trace for either pulse scheme (Pair goes through differential_trace).
GainTrace simulate_normalized_trace(const FiberProfile& fiber, const PulseScheme& pulse,
                                    double probe_offset_hz, const SamplingGrid& grid);

/// Full BGS map. Noise, when given, is injected per channel with sub-seeds
/// derived from (seed, channel index).
BgsMap simulate_bgs(const FiberProfile& fiber, const PulseScheme& pulse,
                    const FrequencySweep& sweep, const SamplingGrid& grid,
                    const std::optional<NoiseSpec>& noise = std::nullopt);

/// Empty when the sweep covers every BFS of the fiber +- 2 linewidths, else a
/// human-readable warning.
std::optional<std::string> sweep_coverage_warning(const FiberProfile& fiber,
                                                  const FrequencySweep& sweep);

/// sigma = A / 10^(snr/20) (or /10 under SnrConvention::Ratio). A is 1 for normalized traces; un-normalized traces
/// need `amplitude_override` or a ContractError is thrown.
GainTrace add_noise(GainTrace trace, const NoiseSpec& noise,
                    std::optional<double> amplitude_override = std::nullopt);

double noise_sigma(double amplitude, double snr_db,
                   SnrConvention convention = SnrConvention::Amplitude);

/// Deterministic per-channel sub-seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace botda
