#pragma once

// Scenario configuration files, the binary BGS map format and ingestion of
// externally measured traces.
//
// Scenario files are YAML with the unit in every key name. BGS files are a
// text header terminated by an `end_header` line followed by the samples as
// little-endian float64, row-major (frequency x time).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "botda/core_model.hpp"
#include "botda/dpp.hpp"
#include "botda/simulator.hpp"
#include "botda/snr.hpp"
#include "botda/trace.hpp"
#include "botda/tv_deconv.hpp"

namespace botda {

struct HotspotConfig {
  double start_m = 0.0;
  double length_m = 0.0;
  double bfs_ghz = 0.0;

  bool operator==(const HotspotConfig&) const = default;
};

struct FiberConfig {
  double length_m = 40.0;
  double base_bfs_ghz = 10.8;
  double linewidth_mhz = 27.0;
  double gain_scale = 1.0;
  std::vector<HotspotConfig> hotspots;

  bool operator==(const FiberConfig&) const = default;
};

struct PulseConfig {
  PulseKind kind = PulseKind::Pair;
  double width_long_ns = 60.0;
  double width_short_ns = 40.0;
  bool allow_short_pair = false;

  bool operator==(const PulseConfig&) const = default;
};

struct GridConfig {
  double sample_rate_gsps = 1.0;
  double group_velocity_m_per_s = kDefaultGroupVelocity;
  /// Zero lead-in before the pulse enters the fiber (and lead-out after).
  double lead_ns = 100.0;

  bool operator==(const GridConfig&) const = default;
};

struct SweepConfig {
  double start_ghz = 10.7;
  double step_mhz = 1.0;
  std::size_t count = 231;

  bool operator==(const SweepConfig&) const = default;
};

struct NoiseConfig {
  /// Absent means noiseless.
  std::optional<double> snr_db;
  SnrConvention convention = SnrConvention::Amplitude;
  std::uint64_t seed = 1;
  int realizations = 100;

  bool operator==(const NoiseConfig&) const = default;
};

enum class DeconvMode { Mu, Tolerance };

struct DeconvSection {
  DeconvMode mode = DeconvMode::Mu;
  double mu = 1e-3;
  double tolerance_mhz = 0.1;
  int max_iters = 500;
  double rel_tolerance = 1e-6;
  double penalty_rho = 2.0;
  bool nonneg = false;
  KernelSampling kernel_sampling = KernelSampling::CellAverage;

  bool operator==(const DeconvSection&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"bgs", "csv"};

  bool operator==(const OutputConfig&) const = default;
};

/// Everything needed to run one pipeline, in file units (GHz, MHz, ns, m).
struct ScenarioConfig {
  std::string name = "scenario";
  FiberConfig fiber;
  PulseConfig pulse;
  GridConfig grid;
  SweepConfig sweep;
  NoiseConfig noise;
  DeconvSection deconv;
  OutputConfig output;

  FiberProfile fiber_profile() const;
  PulseScheme pulse_scheme() const;
  SamplingGrid sampling_grid() const;
  FrequencySweep frequency_sweep() const;
  std::optional<NoiseSpec> noise_spec() const;
  DeconvConfig solver_config() const;
  KernelOptions kernel_options() const;

  /// ValidationError naming the violated rule (domain errors are rethrown as
  /// ValidationError too).
  void validate() const;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Parses and validates. ParseError (with line/column) for syntax errors,
/// unknown keys and mistyped values; ValidationError for invalid scenarios.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Canonical text form: every field written, doubles in shortest round-trip form.
std::string scenario_to_string(const ScenarioConfig& config);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path);

/// 16 hex digits of FNV-1a 64.
std::string hash_text(std::string_view text);

/// hash_text of the canonical text.
std::string config_hash(const ScenarioConfig& config);

struct BgsHeader {
  FrequencySweep sweep;
  SamplingGrid grid;
  TraceMeta meta;
  std::optional<std::string> config_hash;
  /// Byte offset of the first payload sample.
  std::size_t payload_offset = 0;

  std::size_t payload_bytes() const { return sweep.count * grid.n_samples * sizeof(double); }
};

/// Written through a temporary file and renamed into place, so readers never
/// observe a partial file; concurrent writers to one path are serialized.
void write_bgs(const std::filesystem::path& path, const BgsMap& map,
               const std::optional<std::string>& hash = std::nullopt);

/// Header only; the payload is not read but its length is checked.
BgsHeader inspect_bgs(const std::filesystem::path& path);

/// CorruptionError on a malformed header or a payload of the wrong length.
BgsMap read_bgs(const std::filesystem::path& path);

struct CsvSchema {
  /// Header name of the time column.
  std::string time_column = "time_s";
  /// Multiplier taking the time column to seconds.
  double time_unit_s = 1.0;
  /// Gain columns by header name; empty means every other column.
  std::vector<std::string> gain_columns;
  /// Multiplier taking gain-column header labels to Hz (multi-column files).
  double frequency_unit_hz = 1.0;
  /// Probe offset recorded on a single-column trace.
  double probe_offset_hz = 0.0;
  char delimiter = ',';
  /// Largest tolerated deviation of one time step from the mean step.
  double max_jitter = 0.01;
  double group_velocity_m_per_s = kDefaultGroupVelocity;
  PulseScheme pulse;
  bool normalized = false;
};

using IngestedData = std::variant<GainTrace, BgsMap>;

/// A single gain column yields a GainTrace, several a BgsMap whose frequency
/// axis comes from the header labels. IngestError names the first bad row.
IngestedData ingest_csv(std::string_view text, const CsvSchema& schema);

/// Native .bgs files (recognized by their magic line) or delimited text.
IngestedData ingest_external_trace(const std::filesystem::path& path, const CsvSchema& schema);

/// `# key=value` provenance line embedded at the top of every text artifact.
std::string provenance_comment(const std::string& hash, std::optional<std::uint64_t> seed);

}  // namespace botda
