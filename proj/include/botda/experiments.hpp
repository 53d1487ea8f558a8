#pragma once

// Scripted figure reproductions. Each experiment writes per-curve CSV files and
// SVG plots into the output directory and evaluates its acceptance gates. The
// numeric cores are exposed separately so the acceptance suite can reuse them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "botda/bgs_analysis.hpp"
#include "botda/pipeline_io.hpp"
#include "botda/resolution.hpp"

namespace botda {

struct ExperimentOptions {
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  /// Monte Carlo realizations; experiments fall back to their own default.
  std::optional<int> realizations;
  bool allow_short_pair = false;
};

struct Gate {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentReport {
  std::string figure;
  std::vector<Gate> gates;
  std::vector<std::filesystem::path> artifacts;
  /// Hash of the scenario description embedded in every artifact.
  std::string provenance_hash;
  /// A solver or mu search stopped without meeting its tolerance.
  bool non_converged = false;

  bool passed() const;
};

const std::vector<std::string>& figure_ids();

/// ConfigError listing the valid ids when `id` is unknown.
ExperimentReport reproduce_figure(const std::string& id, const ExperimentOptions& options);

/// Bundled scenarios: "fig2a" (two-section fiber, 60 ns pulse) and "fig3c"
/// (three hotspots, 60/40 ns pair).
ScenarioConfig builtin_scenario(const std::string& name);

/// max |envelope(d, t) - envelope(0, t)| over |d| <= max_detuning_hz and
/// t in [t_min_s, t_max_s], on a dense grid plus the interval ends.
double steady_state_max_deviation(double linewidth_hz, double max_detuning_hz, double t_min_s,
                                  double t_max_s);

/// Noiseless simulate -> deconvolve -> fit pipeline on one scenario.
struct DistortionCase {
  PulseScheme pulse;
  FiberProfile fiber{1.0, 10.8e9};
  BfsProfile raw;
  BfsProfile recovered;
  /// Largest |error| within `pre_hotspot_length_m` before each hotspot.
  double pre_hotspot_error_hz = 0.0;
  double pre_hotspot_length_m = 0.0;
  /// Per hotspot: truth minus mean recovered BFS over the central third.
  std::vector<double> degradations_hz;
  /// Per hotspot: largest |error| over the whole hotspot span.
  std::vector<double> hotspot_max_error_hz;
  /// Fitted FWHM range over the uniform sections.
  double fwhm_min_hz = 0.0;
  double fwhm_max_hz = 0.0;
  std::size_t unconverged_channels = 0;
};

/// Optionally hands back the simulated and the recovered maps.
DistortionCase run_distortion_case(const ScenarioConfig& scenario, BgsMap* raw_map = nullptr,
                                   BgsMap* recovered_map = nullptr);

/// The Monte Carlo scenario behind the SNR/resolution studies.
ResolutionScenario resolution_scenario(const ExperimentOptions& options);

struct RatePoint {
  double sample_rate_hz = 0.0;
  double input_snr_db = 0.0;
  MuSearchResult search;
  MuEvaluation evaluation;
  BfsProfile averaged;
};

std::vector<RatePoint> run_sampling_rate_study(const ResolutionScenario& scenario,
                                               const std::vector<double>& rates_hz,
                                               double target_snr_db, double hotspot_length_m);

/// Acceptance gates shared by `reproduce` and the acceptance suite.
Gate gate_distortion_reproduced(const DistortionCase& single);
Gate gate_distortion_eliminated(const DistortionCase& pair);
Gate gate_lorentzian_width(const DistortionCase& pair);
Gate gate_snr_resolution(const std::vector<ResolutionPoint>& tol_01mhz,
                         const std::vector<ResolutionPoint>& tol_05mhz);
Gate gate_sampling_rate(const std::vector<RatePoint>& points);

/// mu for the config's pulse, rate and noise whose averaged degradation of a
/// `resolution_m` hotspot matches deconv.tolerance_mhz.
MuSearchResult select_mu_for_tolerance(const ScenarioConfig& config, double resolution_m);

/// BFS profile as CSV (position, BFS, peak gain, FWHM, fit status).
std::string profile_csv(const BfsProfile& profile, const std::string& provenance);

/// Writes text to a file, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace botda
