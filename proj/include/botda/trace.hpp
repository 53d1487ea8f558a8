#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "botda/core_model.hpp"

namespace botda {

struct TraceMeta {
  PulseScheme pulse;
  bool normalized = false;
  /// True once the trace has been through deconvolution.
  bool recovered = false;
  std::optional<std::uint64_t> seed;

  bool operator==(const TraceMeta&) const = default;
};

/// One detected gain trace at a fixed pump-probe frequency offset.
struct GainTrace {
  double probe_offset_hz = 0.0;
  std::vector<double> samples;
  SamplingGrid grid;
  TraceMeta meta;

  /// Throws ContractError if samples.size() != grid.n_samples.
  void validate() const;

  bool operator==(const GainTrace&) const = default;
};

struct FrequencySweep {
  double start_hz = 0.0;
  double step_hz = 1e6;
  std::size_t count = 1;

  double at(std::size_t i) const { return start_hz + static_cast<double>(i) * step_hz; }
  double last_hz() const { return at(count == 0 ? 0 : count - 1); }

  bool operator==(const FrequencySweep&) const = default;
};

/// Stack of traces over a frequency sweep; all traces share one grid and
/// one set of pulse metadata.
struct BgsMap {
  FrequencySweep sweep;
  std::vector<GainTrace> traces;

  std::size_t n_freqs() const { return traces.size(); }
  std::size_t n_samples() const { return traces.empty() ? 0 : traces.front().grid.n_samples; }
  const SamplingGrid& grid() const { return traces.front().grid; }
  const TraceMeta& meta() const { return traces.front().meta; }

  /// Gain of every channel at one time sample.
  std::vector<double> spectrum_at(std::size_t sample) const;
  std::vector<double> frequencies() const;

  /// Throws ContractError on inconsistent axes or metadata.
  void validate() const;

  bool operator==(const BgsMap&) const = default;
};

}  // namespace botda
