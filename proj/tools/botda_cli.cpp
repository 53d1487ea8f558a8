// Command-line front end: simulate, dpp, deconvolve, analyze, reproduce, ingest.
//
// Exit codes: 0 success, 1 acceptance failure, 2 usage or invalid input,
// 3 numerical non-convergence.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "botda/bgs_analysis.hpp"
#include "botda/dpp.hpp"
#include "botda/errors.hpp"
#include "botda/experiments.hpp"
#include "botda/parallel.hpp"
#include "botda/pipeline_io.hpp"
#include "botda/simulator.hpp"
#include "botda/svg_plot.hpp"
#include "botda/tv_deconv.hpp"

namespace fs = std::filesystem;
using namespace botda;

namespace {

constexpr int kOk = 0, kAcceptanceFail = 1, kUsage = 2, kNonConvergence = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out_dir = "out";
  std::optional<int> realizations;
  bool allow_short_pair = false;
};

ScenarioConfig load_with_overrides(const std::string& path, const Globals& g) {
  ScenarioConfig c = load_scenario(path);
  if (g.allow_short_pair) c.pulse.allow_short_pair = true;
  if (g.seed) c.noise.seed = *g.seed;
  if (g.realizations) c.noise.realizations = *g.realizations;
  c.validate();
  return c;
}

bool wants(const ScenarioConfig& c, const std::string& format) {
  return std::find(c.output.formats.begin(), c.output.formats.end(), format) != c.output.formats.end();
}

std::string map_table(const BgsMap& map, const std::string& provenance) {
  std::string out = provenance + "\ntime_s";
  for (double f : map.frequencies()) out += fmt::format(",{}", f);
  out += "\n";
  for (std::size_t k = 0; k < map.n_samples(); ++k) {
    out += fmt::format("{}", map.grid().time_at(k));
    for (const GainTrace& t : map.traces) out += fmt::format(",{}", t.samples[k]);
    out += "\n";
  }
  return out;
}

/// Kernel length in samples: the spatial resolution of the pulse scheme.
std::size_t kernel_samples(const PulseScheme& p, const SamplingGrid& g) {
  const double span = p.kind == PulseKind::Pair ? p.width_long_s - p.width_short_s : p.width_long_s;
  return static_cast<std::size_t>(std::ceil(span / g.dt_s - 1e-9));
}

/// Raw samples see the fiber centered this far before their nominal position.
double raw_position_offset_m(const BgsMap& map) {
  if (map.meta().recovered) return 0.0;
  const PulseScheme& p = map.meta().pulse;
  const double short_s = p.kind == PulseKind::Pair ? p.width_short_s : 0.0;
  return -map.grid().group_velocity_m_per_s * (p.width_long_s + short_s) / 4.0;
}

int cmd_simulate(const std::string& config_path, const Globals& g) {
  const ScenarioConfig c = load_with_overrides(config_path, g);
  const BgsMap map = simulate_bgs(c.fiber_profile(), c.pulse_scheme(), c.frequency_sweep(),
                                  c.sampling_grid(), c.noise_spec());
  const std::string hash = config_hash(c);
  const fs::path dir = g.out_dir;
  std::vector<fs::path> written;
  if (wants(c, "bgs") || c.output.formats.empty()) {
    write_bgs(dir / (c.name + ".bgs"), map, hash);
    written.push_back(dir / (c.name + ".bgs"));
  }
  const std::string prov = provenance_comment(hash, map.meta().seed);
  if (wants(c, "csv")) {
    write_text_file(dir / (c.name + "_bgs.csv"), map_table(map, prov));
    written.push_back(dir / (c.name + "_bgs.csv"));
  }
  if (wants(c, "svg")) {
    HeatMap h{c.name + ": simulated gain map", "time (ns)", "frequency (GHz)", {}, {}, {}};
    const std::size_t ts = std::max<std::size_t>(1, map.n_samples() / 200);
    const std::size_t fs_ = std::max<std::size_t>(1, map.n_freqs() / 120);
    for (std::size_t k = 0; k < map.n_samples(); k += ts) h.x.push_back(map.grid().time_at(k) * 1e9);
    for (std::size_t f = 0; f < map.n_freqs(); f += fs_) {
      h.y.push_back(map.sweep.at(f) / 1e9);
      std::vector<double> row;
      for (std::size_t k = 0; k < map.n_samples(); k += ts) row.push_back(map.traces[f].samples[k]);
      h.values.push_back(std::move(row));
    }
    write_text_file(dir / (c.name + "_bgs.svg"), "<!-- " + prov.substr(2) + " -->\n" + render_svg(h));
    written.push_back(dir / (c.name + "_bgs.svg"));
  }
  std::cout << prov << "\n";
  for (const fs::path& p : written) std::cout << "wrote " << p.string() << "\n";
  return kOk;
}

int cmd_dpp(const std::string& long_path, const std::string& short_path, const std::string& name,
            bool normalize, double linewidth_mhz, const Globals& g) {
  BgsMap out = differential_map(read_bgs(long_path), read_bgs(short_path));
  if (normalize) {
    const PulseScheme& p = out.meta().pulse;
    const double plateau = reference_plateau(p, linewidth_mhz * 1e6, 1.0,
                                             out.grid().group_velocity_m_per_s);
    for (GainTrace& t : out.traces) {
      for (double& s : t.samples) s /= plateau;
      t.meta.normalized = true;
    }
  }
  const fs::path path = fs::path(g.out_dir) / (name + ".bgs");
  write_bgs(path, out);
  std::cout << "wrote " << path.string() << " (" << out.n_freqs() << " channels, pulse pair "
            << out.meta().pulse.width_long_s * 1e9 << "/" << out.meta().pulse.width_short_s * 1e9
            << " ns)\n";
  return kOk;
}

struct DeconvArgs {
  std::string map_path;
  std::string config_path;
  std::optional<double> mu;
  std::optional<double> tolerance_mhz;
  std::optional<double> resolution_m;
  std::optional<double> linewidth_mhz;
  std::string sampling;
  std::optional<int> max_iters;
};

int cmd_deconvolve(const DeconvArgs& a, const Globals& g) {
  const BgsMap map = read_bgs(a.map_path);
  std::optional<ScenarioConfig> cfg;
  if (!a.config_path.empty()) {
    cfg = load_with_overrides(a.config_path, g);
    if (!(cfg->pulse_scheme() == map.meta().pulse))
      throw ContractError(fmt::format(
          "the map was measured with a {}/{} ns pulse scheme but the config describes {}/{} ns; a "
          "kernel for a different pulse would mis-model the impulse response",
          map.meta().pulse.width_long_s * 1e9, map.meta().pulse.width_short_s * 1e9,
          cfg->pulse.width_long_ns, cfg->pulse.width_short_ns));
  }
  const double lw = a.linewidth_mhz ? *a.linewidth_mhz * 1e6
                                    : (cfg ? cfg->fiber.linewidth_mhz * 1e6 : kDefaultLinewidthHz);
  KernelSampling sampling = cfg ? cfg->deconv.kernel_sampling : KernelSampling::CellAverage;
  if (a.sampling == "point") sampling = KernelSampling::Point;
  if (a.sampling == "cell_average") sampling = KernelSampling::CellAverage;
  const PulseScheme& pulse = map.meta().pulse;
  const DeconvKernel kernel =
      pulse.kind == PulseKind::Pair
          ? dpp_kernel(pulse, lw, map.grid(), KernelOptions{g.allow_short_pair || (cfg && cfg->pulse.allow_short_pair), sampling})
          : peak_envelope_kernel(pulse, lw, map.grid(), sampling);

  DeconvConfig solver = cfg ? cfg->solver_config() : DeconvConfig{};
  if (a.max_iters) solver.max_iters = *a.max_iters;
  const bool tolerance_mode =
      a.tolerance_mhz || (!a.mu && cfg && cfg->deconv.mode == DeconvMode::Tolerance);
  if (a.mu) {
    solver.mu = *a.mu;
  } else if (tolerance_mode) {
    if (!cfg) throw ConfigError("tolerance mode needs --config (noise level and seed)");
    ScenarioConfig c = *cfg;
    if (a.tolerance_mhz) c.deconv.tolerance_mhz = *a.tolerance_mhz;
    const double resolution = a.resolution_m.value_or(0.5);
    const MuSearchResult r = select_mu_for_tolerance(c, resolution);
    std::cout << fmt::format("mu search for a {:g} m hotspot at {:g} MHz tolerance: mu = {:.6g} "
                             "({}, degradation {:.3f} MHz, recovered SNR {:.2f} dB)\n",
                             resolution, c.deconv.tolerance_mhz, r.best.mu, to_string(r.status),
                             r.best.degradation_hz / 1e6, r.best.snr_db);
    if (r.status == MuSearchStatus::NotConverged) {
      std::cerr << "error: the mu search did not converge\n";
      return kNonConvergence;
    }
    solver.mu = r.best.mu;
  }
  const RecoveredMap rec = tv_deconvolve(map, kernel, solver);
  const fs::path out = fs::path(g.out_dir) / (fs::path(a.map_path).stem().string() + "_recovered.bgs");
  write_bgs(out, rec.map, cfg ? std::optional<std::string>(config_hash(*cfg)) : std::nullopt);
  std::size_t unconverged = 0;
  int max_it = 0;
  for (const DeconvDiagnostics& d : rec.diagnostics) {
    unconverged += d.converged ? 0 : 1;
    max_it = std::max(max_it, d.iterations);
  }
  std::cout << fmt::format("mu = {:.6g}; {} channels, max iterations {}; wrote {}\n", solver.mu,
                           rec.diagnostics.size(), max_it, out.string());
  if (unconverged > 0) {
    std::cerr << fmt::format("error: {} of {} channels stopped at max_iters={} without meeting "
                             "rel_tolerance={:g}\n",
                             unconverged, rec.diagnostics.size(), solver.max_iters,
                             solver.rel_tolerance);
    for (std::size_t i = 0; i < rec.diagnostics.size(); ++i)
      if (!rec.diagnostics[i].converged)
        std::cerr << fmt::format("  channel {} ({:.6f} GHz): relative change {:.3g}\n", i,
                                 rec.map.sweep.at(i) / 1e9, rec.diagnostics[i].final_relative_change);
    return kNonConvergence;
  }
  return kOk;
}

int cmd_analyze(const std::string& map_path, const std::string& truth_path,
                std::optional<double> ref_lo, std::optional<double> ref_hi, const Globals& g) {
  const BgsMap map = read_bgs(map_path);
  BfsProfile profile = bfs_profile(map);
  const double shift = raw_position_offset_m(map);
  for (BfsPoint& p : profile.points) p.position_m += shift;

  std::optional<ScenarioConfig> truth;
  if (!truth_path.empty()) truth = load_with_overrides(truth_path, g);
  double lo = ref_lo.value_or(1.0);
  double hi = ref_hi.value_or(5.0);
  if (!ref_hi && truth && !truth->fiber.hotspots.empty())
    hi = std::max(lo + 1.0, truth->fiber.hotspots.front().start_m - 2.0);

  const std::size_t peak = [&] {
    const double target = truth ? truth->fiber.base_bfs_ghz * 1e9 : 0.0;
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < map.n_freqs(); ++i) {
      const double score = truth ? -std::abs(map.sweep.at(i) - target)
                                 : *std::max_element(map.traces[i].samples.begin(),
                                                     map.traces[i].samples.end());
      if (score > best_v) best_v = score, best = i;
    }
    return best;
  }();
  const IndexRange section = range_for_positions(map.grid(), lo - shift, hi - shift);
  const std::size_t klen = map.meta().recovered ? 1 : kernel_samples(map.meta().pulse, map.grid());

  nlohmann::json report;
  report["map"] = map_path;
  report["snr_convention"] = to_string(SnrConvention::Amplitude);
  report["reference_section_m"] = {lo, hi};
  report["peak_channel_hz"] = map.sweep.at(peak);
  try {
    report["snr_blind_db"] = snr_blind(map.traces[peak].samples, section, klen).snr_db;
  } catch (const DomainError& e) {
    report["snr_blind_db"] = nullptr;
    report["snr_blind_error"] = e.what();
  }
  if (truth) {
    const FiberProfile fiber = truth->fiber_profile();
    report["truth_config_hash"] = config_hash(*truth);
    const SamplingGrid tg = truth->sampling_grid();
    if (!map.meta().recovered && tg == map.grid() && truth->frequency_sweep() == map.sweep &&
        truth->pulse_scheme() == map.meta().pulse) {
      const BgsMap clean =
          simulate_bgs(fiber, truth->pulse_scheme(), truth->frequency_sweep(), tg, std::nullopt);
      report["snr_oracle_db"] =
          snr_oracle(map.traces[peak].samples, clean.traces[peak].samples, section, klen).snr_db;
    }
    try {
      report["max_systematic_error_hz"] = max_systematic_error(profile, fiber, 0.0, fiber.length_m());
    } catch (const DomainError& e) {
      report["max_systematic_error_hz"] = nullptr;
    }
    nlohmann::json degr = nlohmann::json::array();
    for (std::size_t h = 0; h < fiber.hotspots().size(); ++h) {
      nlohmann::json d;
      d["hotspot"] = h;
      d["start_m"] = fiber.hotspots()[h].start_m;
      d["length_m"] = fiber.hotspots()[h].length_m;
      try {
        d["degradation_hz"] = bfs_degradation(profile, fiber, h);
      } catch (const DomainError& e) {
        d["degradation_hz"] = nullptr;
        d["error"] = e.what();
      }
      degr.push_back(d);
    }
    report["hotspot_degradations"] = degr;
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const BfsPoint& p : profile.points)
    if (!p.fit_ok) failures.push_back({{"position_m", p.position_m}, {"reason", p.failure}});
  report["fit_failures"] = failures;

  const std::string stem = fs::path(map_path).stem().string();
  const std::string hash = hash_text(map_path + (truth ? config_hash(*truth) : std::string()));
  const std::string prov = provenance_comment(hash, map.meta().seed);
  report["provenance"] = prov.substr(2);
  write_text_file(fs::path(g.out_dir) / (stem + "_bfs.csv"), profile_csv(profile, prov));
  write_text_file(fs::path(g.out_dir) / (stem + "_metrics.json"), report.dump(2) + "\n");
  std::cout << prov << "\n" << report.dump(2) << "\n";
  return kOk;
}

int cmd_reproduce(const std::string& id, const Globals& g) {
  ExperimentOptions o;
  o.out_dir = fs::path(g.out_dir) / id;
  o.seed = g.seed.value_or(1);
  o.realizations = g.realizations;
  o.allow_short_pair = g.allow_short_pair;
  const ExperimentReport r = reproduce_figure(id, o);
  std::cout << provenance_comment(r.provenance_hash, o.seed) << "\n";
  for (const fs::path& p : r.artifacts) std::cout << "wrote " << p.string() << "\n";
  for (const Gate& gate : r.gates)
    std::cout << (gate.pass ? "PASS " : "FAIL ") << gate.name << ": " << gate.detail << "\n";
  if (r.gates.empty()) std::cout << "no acceptance gate for " << id << "\n";
  if (r.passed()) return kOk;
  return r.non_converged ? kNonConvergence : kAcceptanceFail;
}

struct IngestArgs {
  std::string path;
  std::string name;
  CsvSchema schema;
  std::vector<std::string> gain_columns;
  std::optional<double> long_ns, short_ns;
};

int cmd_ingest(IngestArgs a, const Globals& g) {
  a.schema.gain_columns = a.gain_columns;
  if (a.long_ns) {
    a.schema.pulse = a.short_ns ? PulseScheme::pair(*a.long_ns * 1e-9, *a.short_ns * 1e-9)
                                : PulseScheme::single(*a.long_ns * 1e-9);
    a.schema.pulse.validate();
  }
  const IngestedData data = ingest_external_trace(a.path, a.schema);
  BgsMap map;
  if (const auto* t = std::get_if<GainTrace>(&data)) {
    map.sweep = {t->probe_offset_hz, 1.0, 1};
    map.traces.push_back(*t);
  } else {
    map = std::get<BgsMap>(data);
  }
  const std::string name = a.name.empty() ? fs::path(a.path).stem().string() : a.name;
  const fs::path out = fs::path(g.out_dir) / (name + ".bgs");
  write_bgs(out, map);
  std::cout << fmt::format("ingested {}: {} channel(s) x {} samples, dt = {:g} ns, t0 = {:g} ns; "
                           "wrote {}\n",
                           a.path, map.n_freqs(), map.n_samples(), map.grid().dt_s * 1e9,
                           map.grid().t0_s * 1e9, out.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BOTDA deconvolution toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Noise seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--realizations", g.realizations,
                 "Monte Carlo realizations (fewer is faster but loosens every Monte Carlo tolerance)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--allow-short-pair", g.allow_short_pair,
               "Accept pulse pairs whose short width is below 1.08 / linewidth");

  std::string config_path;
  auto* sim = app.add_subcommand("simulate", "Simulate a BGS map from a scenario config");
  sim->add_option("config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);

  std::string long_path, short_path, dpp_name = "dpp";
  bool normalize = false;
  double dpp_linewidth = 27.0;
  auto* dpp = app.add_subcommand("dpp", "Differential map of a long- and a short-pulse BGS map");
  dpp->add_option("long", long_path, "Long-pulse map (.bgs)")->required()->check(CLI::ExistingFile);
  dpp->add_option("short", short_path, "Short-pulse map (.bgs)")->required()->check(CLI::ExistingFile);
  dpp->add_option("--name", dpp_name, "Output name")->capture_default_str();
  dpp->add_flag("--normalize", normalize, "Divide by the pair's zero-detuning plateau");
  dpp->add_option("--linewidth-mhz", dpp_linewidth, "Linewidth for normalization")->capture_default_str();

  DeconvArgs da;
  auto* dec = app.add_subcommand("deconvolve", "TV deconvolution of a BGS map");
  dec->add_option("map", da.map_path, "Input map (.bgs)")->required()->check(CLI::ExistingFile);
  dec->add_option("--config", da.config_path, "Scenario file (solver, kernel and noise settings)")
      ->check(CLI::ExistingFile);
  auto* mu_opt = dec->add_option("--mu", da.mu, "Regularization weight")->check(CLI::NonNegativeNumber);
  dec->add_option("--tolerance-mhz", da.tolerance_mhz, "Select mu for this BFS degradation")
      ->check(CLI::PositiveNumber)
      ->excludes(mu_opt);
  dec->add_option("--resolution-m", da.resolution_m, "Target resolution in tolerance mode (default 0.5)")
      ->check(CLI::PositiveNumber);
  dec->add_option("--linewidth-mhz", da.linewidth_mhz, "Brillouin linewidth for the kernel");
  dec->add_option("--sampling", da.sampling, "Kernel sampling")
      ->check(CLI::IsMember({"point", "cell_average"}));
  dec->add_option("--max-iters", da.max_iters, "Solver iteration cap")->check(CLI::PositiveNumber);

  std::string an_map, an_truth;
  std::optional<double> ref_lo, ref_hi;
  auto* an = app.add_subcommand("analyze", "BFS profile and metrics of a (recovered) map");
  an->add_option("map", an_map, "Map (.bgs)")->required()->check(CLI::ExistingFile);
  an->add_option("--truth", an_truth, "Scenario file describing the true fiber")->check(CLI::ExistingFile);
  an->add_option("--reference-lo-m", ref_lo, "Start of the uniform SNR section");
  an->add_option("--reference-hi-m", ref_hi, "End of the uniform SNR section");

  std::string figure;
  std::string ids;
  for (const std::string& f : figure_ids()) ids += (ids.empty() ? "" : ", ") + f;
  auto* rep = app.add_subcommand("reproduce", "Reproduce a figure and check its acceptance gates");
  rep->add_option("figure", figure, "One of: " + ids)->required()->check(CLI::IsMember(figure_ids()));

  IngestArgs ia;
  auto* ing = app.add_subcommand("ingest", "Convert an external trace (CSV or .bgs) to a .bgs map");
  ing->add_option("file", ia.path, "Input file")->required()->check(CLI::ExistingFile);
  ing->add_option("--name", ia.name, "Output name (default: input stem)");
  ing->add_option("--time-column", ia.schema.time_column, "Time column header")->capture_default_str();
  ing->add_option("--time-unit-s", ia.schema.time_unit_s, "Seconds per time unit")->capture_default_str();
  ing->add_option("--gain-columns", ia.gain_columns, "Gain column headers (default: all others)")
      ->delimiter(',');
  ing->add_option("--frequency-unit-hz", ia.schema.frequency_unit_hz,
                  "Hz per unit of the frequency header labels")
      ->capture_default_str();
  ing->add_option("--probe-offset-hz", ia.schema.probe_offset_hz, "Frequency of a single-column trace");
  ing->add_option("--delimiter", ia.schema.delimiter, "Column delimiter")->capture_default_str();
  ing->add_option("--max-jitter", ia.schema.max_jitter, "Tolerated relative time-step deviation")
      ->capture_default_str();
  ing->add_option("--pulse-long-ns", ia.long_ns, "Pulse (or long pulse) width");
  ing->add_option("--pulse-short-ns", ia.short_ns, "Short pulse width of a pair");
  ing->add_flag("--normalized", ia.schema.normalized, "Gain is already normalized to the plateau");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (g.threads > 0) set_thread_count(g.threads);

  try {
    if (*sim) return cmd_simulate(config_path, g);
    if (*dpp) return cmd_dpp(long_path, short_path, dpp_name, normalize, dpp_linewidth, g);
    if (*dec) return cmd_deconvolve(da, g);
    if (*an) return cmd_analyze(an_map, an_truth, ref_lo, ref_hi, g);
    if (*rep) return cmd_reproduce(figure, g);
    if (*ing) return cmd_ingest(ia, g);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CorruptionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kAcceptanceFail;
  }
  return kUsage;
}
