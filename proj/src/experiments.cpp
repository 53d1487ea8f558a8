#include "botda/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>

#include "botda/core_model.hpp"
#include "botda/dpp.hpp"
#include "botda/errors.hpp"
#include "botda/simulator.hpp"
#include "botda/svg_plot.hpp"
#include "botda/tv_deconv.hpp"

namespace botda {

bool ExperimentReport::passed() const {
  return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.pass; });
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

std::string profile_csv(const BfsProfile& profile, const std::string& provenance) {
  std::string out = provenance + "\nposition_m,bfs_hz,peak_gain,fwhm_hz,fit_residual_rms,fit_ok,failure\n";
  for (const BfsPoint& p : profile.points)
    out += fmt::format("{},{},{},{},{},{},{}\n", p.position_m, p.bfs_hz, p.peak_gain, p.fwhm_hz,
                       p.fit_residual_rms, p.fit_ok ? 1 : 0, p.failure);
  return out;
}

namespace {

constexpr double kMHz = 1e6;

/// Collects the artifacts of one experiment and stamps each with provenance.
class Artifacts {
 public:
  Artifacts(ExperimentReport& report, const ExperimentOptions& options, const std::string& description)
      : report_(report), dir_(options.out_dir), seed_(options.seed) {
    report_.provenance_hash = hash_text(description + fmt::format(" seed={}", options.seed));
  }

  std::string provenance() const { return provenance_comment(report_.provenance_hash, seed_); }

  void csv(const std::string& name, const std::vector<std::string>& columns,
           const std::vector<std::vector<double>>& rows) {
    std::string text = provenance() + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) text += (i ? "," : "") + columns[i];
    text += "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) text += (i ? "," : "") + fmt::format("{}", row[i]);
      text += "\n";
    }
    raw(name, text);
  }

  void raw(const std::string& name, const std::string& text) {
    write_text_file(dir_ / name, text);
    report_.artifacts.push_back(dir_ / name);
  }

  void svg(const std::string& name, const std::string& svg_text) {
    const std::string stamp = "<!-- " + provenance().substr(2) + " -->\n";
    raw(name, stamp + svg_text);
  }

  void bgs(const std::string& name, const BgsMap& map) {
    write_bgs(dir_ / name, map, report_.provenance_hash);
    report_.artifacts.push_back(dir_ / name);
  }

 private:
  ExperimentReport& report_;
  std::filesystem::path dir_;
  std::uint64_t seed_;
};

std::vector<double> arange(double lo, double hi, double step) {
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

/// Center of the fiber window seen by a raw (un-deconvolved) sample, relative
/// to the sample's nominal position.
double raw_window_offset_m(const PulseScheme& pulse, double v) {
  const double short_s = pulse.kind == PulseKind::Pair ? pulse.width_short_s : 0.0;
  return -v * (pulse.width_long_s + short_s) / 4.0;
}

BfsProfile shifted(BfsProfile p, double dz) {
  for (BfsPoint& q : p.points) q.position_m += dz;
  return p;
}

Series profile_series(const std::string& label, const BfsProfile& p, double base_hz) {
  Series s{label, {}, {}, false};
  for (const BfsPoint& q : p.points) {
    s.x.push_back(q.position_m);
    s.y.push_back(q.fit_ok ? (q.bfs_hz - base_hz) / kMHz : std::numeric_limits<double>::quiet_NaN());
  }
  return s;
}

Series truth_series(const FiberProfile& fiber, double lo, double hi) {
  Series s{"truth", {}, {}, false};
  for (double z : arange(lo, hi, 0.01)) {
    s.x.push_back(z);
    s.y.push_back((fiber.bfs_at(z) - fiber.base_bfs_hz()) / kMHz);
  }
  return s;
}

/// BGS map as a multi-column table: time, then one column per frequency.
std::string map_csv(const BgsMap& map, const std::string& provenance) {
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

HeatMap map_heatmap(const BgsMap& map, const std::string& title, double z_lo, double z_hi) {
  HeatMap h;
  h.title = title;
  h.x_label = "position (m)";
  h.y_label = "frequency (GHz)";
  const SamplingGrid& g = map.grid();
  const std::size_t fstride = std::max<std::size_t>(1, map.n_freqs() / 120);
  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < g.n_samples; ++k) {
    const double z = g.position_at(k);
    if (z >= z_lo && z <= z_hi) cols.push_back(k);
  }
  const std::size_t zstride = std::max<std::size_t>(1, cols.size() / 200);
  for (std::size_t i = 0; i < cols.size(); i += zstride) h.x.push_back(g.position_at(cols[i]));
  for (std::size_t f = 0; f < map.n_freqs(); f += fstride) {
    h.y.push_back(map.sweep.at(f) / 1e9);
    std::vector<double> row;
    for (std::size_t i = 0; i < cols.size(); i += zstride) row.push_back(map.traces[f].samples[cols[i]]);
    h.values.push_back(std::move(row));
  }
  return h;
}

std::string mhz(double hz) { return fmt::format("{:.3f} MHz", hz / kMHz); }

// ---------------------------------------------------------------------------

ExperimentReport run_fig1(const ExperimentOptions& options) {
  ExperimentReport report;
  report.figure = "fig1";
  const double bfs = 10.8e9, lw = kDefaultLinewidthHz, width = 60e-9;
  Artifacts art(report, options, fmt::format("fig1 bfs={} linewidth={} width={}", bfs, lw, width));

  const std::vector<double> detunings = arange(-60e6, 60e6, 2e6);
  const std::vector<double> times = arange(0.0, 80e-9, 0.5e-9);
  std::vector<std::vector<double>> rows;
  HeatMap surface{"Real part of the gain envelope, 60 ns pulse", "time (ns)", "detuning (MHz)", {}, {}, {}};
  for (double t : times) surface.x.push_back(t * 1e9);
  for (double d : detunings) {
    const ComplexRate g = detuning_parameter(bfs, bfs + d, lw);
    surface.y.push_back(d / kMHz);
    std::vector<double> row;
    for (double t : times) {
      const std::complex<double> e = envelope(g, width, t);
      rows.push_back({d / kMHz, t * 1e9, e.real(), e.imag()});
      row.push_back(e.real());
    }
    surface.values.push_back(std::move(row));
  }
  art.csv("fig1a_envelope.csv", {"detuning_mhz", "time_ns", "real", "imag"}, rows);
  art.svg("fig1a_envelope.svg", render_svg(surface));

  const std::vector<double> examples{0.0, 10e6, 20e6, 30e6, 40e6, 60e6};
  LinePlot lines{"Gain envelopes at selected detunings", "time (ns)", "real part", {}};
  std::vector<std::string> cols{"time_ns"};
  std::vector<std::vector<double>> table(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) table[k].push_back(times[k] * 1e9);
  for (double d : examples) {
    const ComplexRate g = detuning_parameter(bfs, bfs + d, lw);
    Series s{fmt::format("{:g} MHz", d / kMHz), {}, {}, false};
    cols.push_back(fmt::format("real_{:g}mhz", d / kMHz));
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double v = envelope(g, width, times[k]).real();
      s.x.push_back(times[k] * 1e9);
      s.y.push_back(v);
      table[k].push_back(v);
    }
    lines.series.push_back(std::move(s));
  }
  art.csv("fig1b_examples.csv", cols, table);
  art.svg("fig1b_examples.svg", render_svg(lines));
  return report;
}

ExperimentReport run_fig2(const ExperimentOptions& options) {
  ExperimentReport report;
  report.figure = "fig2";
  ScenarioConfig cfg = builtin_scenario("fig2a");
  const FiberProfile fiber = cfg.fiber_profile();
  Artifacts art(report, options, "fig2 " + config_hash(cfg));
  const double v = cfg.grid.group_velocity_m_per_s;
  const double probe = fiber.base_bfs_hz();
  const double lw = fiber.linewidth_hz();
  const PulseScheme single = PulseScheme::single(60e-9);
  const PulseScheme pair = PulseScheme::pair(60e-9, 40e-9);

  // Gain contributed by position z to the sample received at time t.
  auto density = [&](const PulseScheme& p, double z, double t) {
    const ComplexRate g = detuning_parameter(fiber.bfs_at(z), probe, lw);
    const double tau = t - 2.0 * z / v;
    const std::complex<double> env =
        p.kind == PulseKind::Single ? envelope(g, p.width_long_s, tau) : pair_envelope(g, p, tau);
    return (env * impulse_response_density(fiber, z, probe)).real();
  };
  const std::vector<double> zs = arange(0.0, fiber.length_m(), 0.25);
  const std::vector<double> ts = arange(0.0, 2.0 * fiber.length_m() / v + 60e-9, 2e-9);
  for (const auto& [tag, pulse] : {std::pair{"fig2a", single}, std::pair{"fig2b", pair}}) {
    HeatMap h{std::string(tag) + ": induced gain, " +
                  (pulse.kind == PulseKind::Single ? "60 ns pulse" : "60/40 ns pair"),
              "position (m)", "time (ns)", zs, {}, {}};
    std::vector<std::vector<double>> rows;
    for (double t : ts) {
      h.y.push_back(t * 1e9);
      std::vector<double> row;
      for (double z : zs) {
        const double a = density(pulse, z, t);
        row.push_back(a);
        rows.push_back({z, t * 1e9, a});
      }
      h.values.push_back(std::move(row));
    }
    art.csv(std::string(tag) + "_gain_map.csv", {"position_m", "time_ns", "gain_density"}, rows);
    art.svg(std::string(tag) + "_gain_map.svg", render_svg(h));
  }

  // Kernels along received-time lines centered at 8, 20 and 32 m.
  const std::vector<double> centers{8.0, 20.0, 32.0};
  for (const auto& [tag, pulse, names] :
       {std::tuple{"fig2c", single, std::vector<std::string>{"A", "B", "C"}},
        std::tuple{"fig2d", pair, std::vector<std::string>{"D", "E", "F"}}}) {
    const std::vector<double> z_fine = arange(0.0, fiber.length_m(), 0.05);
    LinePlot plot{std::string(tag) + ": p(z, t - 2z/V) along received-time lines", "position (m)",
                  "real part", {}};
    std::vector<std::vector<double>> table(z_fine.size());
    for (std::size_t i = 0; i < z_fine.size(); ++i) table[i].push_back(z_fine[i]);
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double t = 2.0 * centers[c] / v + pulse.width_long_s / 2.0;
      Series s{names[c] + fmt::format(" (t = {:.0f} ns)", t * 1e9), {}, {}, false};
      for (std::size_t i = 0; i < z_fine.size(); ++i) {
        const double z = z_fine[i];
        const ComplexRate g = detuning_parameter(fiber.bfs_at(z), probe, lw);
        const double tau = t - 2.0 * z / v;
        const double val = (pulse.kind == PulseKind::Single ? envelope(g, pulse.width_long_s, tau)
                                                           : pair_envelope(g, pulse, tau))
                               .real();
        table[i].push_back(val);
        s.x.push_back(z);
        s.y.push_back(val);
      }
      plot.series.push_back(std::move(s));
    }
    art.csv(std::string(tag) + "_kernels.csv", {"position_m", names[0], names[1], names[2]}, table);
    art.svg(std::string(tag) + "_kernels.svg", render_svg(plot));
  }

  const SamplingGrid grid = cfg.sampling_grid();
  const GainTrace ts_single = simulate_normalized_trace(fiber, single, probe, grid);
  const GainTrace ts_pair = simulate_normalized_trace(fiber, pair, probe, grid);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < grid.n_samples; ++k)
    rows.push_back({grid.time_at(k) * 1e9, ts_single.samples[k], ts_pair.samples[k]});
  art.csv("fig2_traces.csv", {"time_ns", "single_60ns", "pair_60_40ns"}, rows);

  // Envelope mismatch between a 30 MHz detuned section and the BGS peak.
  const ComplexRate g0 = detuning_parameter(probe, probe, lw);
  const ComplexRate g30 = detuning_parameter(probe + 30e6, probe, lw);
  double pair_dev = 0.0, single_dev = 0.0;
  for (double t : arange(0.0, 60e-9, 0.1e-9)) {
    pair_dev = std::max(pair_dev, std::abs(pair_envelope(g30, pair, t) - pair_envelope(g0, pair, t)));
    single_dev = std::max(single_dev, std::abs(envelope(g30, 60e-9, t) - envelope(g0, 60e-9, t)));
  }
  const double bound = cancellation_bound(40e-9, lw);
  report.gates.push_back({"pair envelope independent of detuning", pair_dev <= bound,
                          fmt::format("max |p_30MHz - p_0| = {:.4g} <= {:.4g}", pair_dev, bound)});
  report.gates.push_back({"single-pulse leading head depends on detuning", single_dev > bound,
                          fmt::format("max |p_30MHz - p_0| = {:.4g} > {:.4g}", single_dev, bound)});
  return report;
}

ScenarioConfig single_pulse_variant(ScenarioConfig cfg) {
  cfg.name += "-single20";
  cfg.pulse.kind = PulseKind::Single;
  cfg.pulse.width_long_ns = 20.0;
  cfg.pulse.width_short_ns = 0.0;
  return cfg;
}

ExperimentReport run_fig3_or_4(const ExperimentOptions& options, bool fig4) {
  ExperimentReport report;
  report.figure = fig4 ? "fig4" : "fig3";
  ScenarioConfig cfg = builtin_scenario("fig3c");
  cfg.pulse.allow_short_pair = options.allow_short_pair;
  Artifacts art(report, options, report.figure + " " + config_hash(cfg));
  const ScenarioConfig single_cfg = single_pulse_variant(cfg);
  const double v = cfg.grid.group_velocity_m_per_s;

  if (!fig4) {
    for (const auto& [tag, sc] : {std::pair{"fig3a", single_cfg}, std::pair{"fig3c", cfg}}) {
      BgsMap raw, recovered;
      const DistortionCase c = run_distortion_case(sc, &raw, &recovered);
      if (c.unconverged_channels > 0) report.non_converged = true;
      const std::string rtag = std::string(tag) == "fig3a" ? "fig3b" : "fig3d";
      art.bgs(std::string(tag) + "_bgs.bgs", raw);
      art.bgs(rtag + "_recovered.bgs", recovered);
      art.raw(std::string(tag) + "_bgs.csv", map_csv(raw, art.provenance()));
      art.raw(rtag + "_recovered.csv", map_csv(recovered, art.provenance()));
      const double lead = -raw_window_offset_m(sc.pulse_scheme(), v);
      art.svg(std::string(tag) + "_bgs.svg",
              render_svg(map_heatmap(raw, std::string(tag) + ": simulated BGS (positions not yet "
                                                             "corrected for the pulse delay)",
                                     0.0, 40.0 + 2.0 * lead)));
      art.svg(rtag + "_recovered.svg",
              render_svg(map_heatmap(recovered, rtag + ": deconvolved BGS", 0.0, 40.0)));
      if (sc.pulse.kind == PulseKind::Pair) report.gates.push_back(gate_distortion_eliminated(c));
    }
    return report;
  }

  const DistortionCase single = run_distortion_case(single_cfg);
  const DistortionCase pair = run_distortion_case(cfg);
  report.non_converged = single.unconverged_channels + pair.unconverged_channels > 0;
  const double base = single.fiber.base_bfs_hz();
  for (const auto& [tag, c] : {std::pair{"fig4a", &single}, std::pair{"fig4b", &pair}}) {
    const BfsProfile raw = shifted(c->raw, raw_window_offset_m(c->pulse, v));
    art.raw(std::string(tag) + "_raw.csv", profile_csv(raw, art.provenance()));
    art.raw(std::string(tag) + "_deconvolved.csv", profile_csv(c->recovered, art.provenance()));
    LinePlot plot{std::string(tag) + (c->pulse.kind == PulseKind::Single ? ": 20 ns pulse"
                                                                         : ": 60/40 ns pair"),
                  "position (m)", "BFS - 10.8 GHz (MHz)", {}};
    plot.series.push_back(truth_series(c->fiber, 0.0, 40.0));
    plot.series.push_back(profile_series("raw", raw, base));
    plot.series.push_back(profile_series("deconvolved", c->recovered, base));
    art.svg(std::string(tag) + "_bfs.svg", render_svg(plot));
  }
  report.gates.push_back(gate_distortion_reproduced(single));
  report.gates.push_back(gate_distortion_eliminated(pair));
  report.gates.push_back(gate_lorentzian_width(pair));
  return report;
}

double uniform_error_std(const BfsProfile& p, const FiberProfile& fiber, double margin) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const FiberSegment& s : fiber.segments()) {
    if (s.bfs_hz != fiber.base_bfs_hz()) continue;
    for (const BfsPoint& q : p.points) {
      if (q.position_m < s.start_m + margin || q.position_m > s.end_m - margin || !q.fit_ok) continue;
      const double e = q.bfs_hz - s.bfs_hz;
      sum += e;
      sq += e * e;
      ++n;
    }
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
}

ExperimentReport run_fig5(const ExperimentOptions& options) {
  ExperimentReport report;
  report.figure = "fig5";
  ResolutionScenario sc = resolution_scenario(options);
  ScenarioConfig cfg = builtin_scenario("fig3c");
  cfg.noise.snr_db = sc.input_snr_db;
  cfg.noise.convention = sc.snr_convention;
  cfg.noise.seed = options.seed;
  cfg.noise.realizations = sc.realizations;
  const double tolerance = 0.5e6;
  Artifacts art(report, options, "fig5 " + config_hash(cfg) + fmt::format(" tolerance={}", tolerance));

  const FiberProfile fiber = cfg.fiber_profile();
  const BgsMap map = simulate_bgs(fiber, cfg.pulse_scheme(), cfg.frequency_sweep(),
                                  cfg.sampling_grid(), cfg.noise_spec());
  const DeconvKernel kernel =
      dpp_kernel(cfg.pulse_scheme(), fiber.linewidth_hz(), map.grid(), cfg.kernel_options());
  const double v = cfg.grid.group_velocity_m_per_s;
  const BfsProfile raw = shifted(bfs_profile(map), raw_window_offset_m(cfg.pulse_scheme(), v));
  art.raw("fig5_dpp_raw.csv", profile_csv(raw, art.provenance()));

  std::map<double, BfsProfile> recovered;
  std::vector<std::vector<double>> mu_rows;
  for (double length : {1.0, 0.5}) {
    const MuSearchResult r = search_mu_for_degradation(HotspotStudy(sc, length), tolerance);
    if (r.status == MuSearchStatus::NotConverged) report.non_converged = true;
    DeconvConfig solver = cfg.solver_config();
    solver.mu = r.best.mu;
    solver.max_iters = 3000;
    const RecoveredMap rec = tv_deconvolve(map, kernel, solver);
    if (!rec.all_converged()) report.non_converged = true;
    recovered[length] = bfs_profile(rec.map);
    mu_rows.push_back({length, r.best.mu, r.best.degradation_hz / kMHz, r.best.snr_db});
    const std::string tag = length == 1.0 ? "fig5a" : "fig5b";
    art.raw(tag + "_deconvolved.csv", profile_csv(recovered[length], art.provenance()));
    LinePlot plot{fmt::format("{}: {:g} m resolution (mu = {:.3g})", tag, length, r.best.mu),
                  "position (m)", "BFS - 10.8 GHz (MHz)", {}};
    plot.series.push_back(truth_series(fiber, 0.0, 40.0));
    plot.series.push_back(profile_series("DPP raw", raw, fiber.base_bfs_hz()));
    plot.series.push_back(profile_series("deconvolved", recovered[length], fiber.base_bfs_hz()));
    art.svg(tag + "_bfs.svg", render_svg(plot));
  }
  art.csv("fig5_mu.csv", {"resolution_m", "mu", "mc_degradation_mhz", "recovered_snr_db"}, mu_rows);

  const double std1 = uniform_error_std(recovered[1.0], fiber, 1.5);
  const double std05 = uniform_error_std(recovered[0.5], fiber, 1.5);
  report.gates.push_back({"finer resolution raises BFS uncertainty", std05 > std1,
                          fmt::format("uniform-section BFS std {} at 0.5 m vs {} at 1 m", mhz(std05),
                                      mhz(std1))});
  const double d1 = std::abs(bfs_degradation(recovered[1.0], fiber, 2));
  const double d05 = std::abs(bfs_degradation(recovered[0.5], fiber, 2));
  report.gates.push_back({"0.5 m hotspot restored better at 0.5 m resolution", d05 < d1,
                          fmt::format("|degradation| {} vs {}", mhz(d05), mhz(d1))});
  return report;
}

std::string status_name(MuSearchStatus s) { return to_string(s); }

ExperimentReport run_fig6a(const ExperimentOptions& options) {
  ExperimentReport report;
  report.figure = "fig6a";
  const ResolutionScenario sc = resolution_scenario(options);
  Artifacts art(report, options,
                fmt::format("fig6a realizations={} convention={}", sc.realizations,
                            to_string(sc.snr_convention)));
  const std::vector<double> lengths{0.5, 1.0, 1.5};
  const std::vector<ResolutionPoint> t01 = find_spatial_resolution(sc, 0.1e6, lengths);
  const std::vector<ResolutionPoint> t05 = find_spatial_resolution(sc, 0.5e6, lengths);

  std::string csv = art.provenance() + "\n# snr convention: " + to_string(sc.snr_convention) +
                    "\ntolerance_mhz,resolution_m,mu,snr_db,baseline_snr_db,improvement_db,"
                    "degradation_mhz,status\n";
  LinePlot plot{"SNR versus spatial resolution", "spatial resolution (m)", "SNR (dB)", {}};
  Series base{"DPP", {}, {}, true};
  for (const auto& [tol, pts] : {std::pair{0.1, &t01}, std::pair{0.5, &t05}}) {
    Series s{fmt::format("deconvolution, {:g} MHz", tol), {}, {}, true};
    for (const ResolutionPoint& p : *pts) {
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", tol, p.hotspot_length_m, p.mu, p.snr_db,
                         p.baseline_snr_db, p.improvement_db(), p.degradation_hz / kMHz,
                         status_name(p.status));
      if (p.status == MuSearchStatus::NotConverged) report.non_converged = true;
      s.x.push_back(p.hotspot_length_m);
      s.y.push_back(p.snr_db);
      if (tol == 0.1) {
        base.x.push_back(p.hotspot_length_m);
        base.y.push_back(p.baseline_snr_db);
      }
    }
    plot.series.push_back(std::move(s));
  }
  plot.series.push_back(std::move(base));
  art.raw("fig6a_snr.csv", csv);
  art.svg("fig6a_snr.svg", render_svg(plot));
  report.gates.push_back(gate_snr_resolution(t01, t05));
  return report;
}

ExperimentReport run_fig6b(const ExperimentOptions& options) {
  ExperimentReport report;
  report.figure = "fig6b";
  const ResolutionScenario sc = resolution_scenario(options);
  Artifacts art(report, options,
                fmt::format("fig6b realizations={} convention={}", sc.realizations,
                            to_string(sc.snr_convention)));
  const std::vector<RatePoint> pts =
      run_sampling_rate_study(sc, {0.5e9, 1e9, 2e9, 5e9}, 26.0, 0.5);

  std::string csv = art.provenance() + "\n# snr convention: " + to_string(sc.snr_convention) +
                    "\nsample_rate_gsps,input_snr_db,mu,recovered_snr_db,degradation_mhz,status\n";
  std::string prof = art.provenance() + "\nsample_rate_gsps,position_m,bfs_hz,fit_ok\n";
  LinePlot plot{"Averaged BFS of a 0.5 m hotspot", "position (m)", "BFS - 10.8 GHz (MHz)", {}};
  HotspotStudy truth_study(sc, 0.5);
  plot.series.push_back(truth_series(truth_study.fiber(), sc.hotspot_start_m - 1.0,
                                     sc.hotspot_start_m + 1.5));
  for (const RatePoint& p : pts) {
    csv += fmt::format("{},{},{},{},{},{}\n", p.sample_rate_hz / 1e9, p.input_snr_db, p.search.best.mu,
                       p.search.best.snr_db, p.evaluation.degradation_hz / kMHz,
                       status_name(p.search.status));
    if (p.search.status == MuSearchStatus::NotConverged) report.non_converged = true;
    for (const BfsPoint& q : p.averaged.points)
      prof += fmt::format("{},{},{},{}\n", p.sample_rate_hz / 1e9, q.position_m, q.bfs_hz,
                          q.fit_ok ? 1 : 0);
    plot.series.push_back(
        profile_series(fmt::format("{:g} GSa/s", p.sample_rate_hz / 1e9), p.averaged, sc.base_bfs_hz));
  }
  art.raw("fig6b_degradation.csv", csv);
  art.raw("fig6b_profiles.csv", prof);
  art.svg("fig6b_profiles.svg", render_svg(plot));
  report.gates.push_back(gate_sampling_rate(pts));
  return report;
}

const std::map<std::string, std::function<ExperimentReport(const ExperimentOptions&)>>& registry() {
  static const std::map<std::string, std::function<ExperimentReport(const ExperimentOptions&)>> r{
      {"fig1", run_fig1},
      {"fig2", run_fig2},
      {"fig3", [](const ExperimentOptions& o) { return run_fig3_or_4(o, false); }},
      {"fig4", [](const ExperimentOptions& o) { return run_fig3_or_4(o, true); }},
      {"fig5", run_fig5},
      {"fig6a", run_fig6a},
      {"fig6b", run_fig6b},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig1", "fig2", "fig3", "fig4", "fig5", "fig6a", "fig6b"};
  return ids;
}

ExperimentReport reproduce_figure(const std::string& id, const ExperimentOptions& options) {
  const auto it = registry().find(id);
  if (it == registry().end()) {
    std::string list;
    for (const std::string& f : figure_ids()) list += (list.empty() ? "" : ", ") + f;
    throw ConfigError("unknown figure '" + id + "'; valid ids: " + list);
  }
  return it->second(options);
}

ScenarioConfig builtin_scenario(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.grid.lead_ns = 60.0;
  c.noise.snr_db.reset();
  c.output.formats = {"bgs", "csv", "svg"};
  if (name == "fig2a") {
    c.fiber.hotspots = {{20.0, 20.0, 10.83}};
    c.pulse = {PulseKind::Single, 60.0, 0.0, false};
    c.sweep = {10.75, 1.0, 131};
    c.deconv.mu = 1e-4;
    c.deconv.max_iters = 2000;
    return c;
  }
  if (name == "fig3c") {
    c.fiber.hotspots = {{10.0, 3.0, 10.83}, {20.0, 1.0, 10.83}, {28.0, 0.5, 10.83}};
    c.pulse = {PulseKind::Pair, 60.0, 40.0, false};
    c.sweep = {10.7, 1.0, 231};
    c.deconv.mu = 1e-4;
    c.deconv.max_iters = 2000;
    return c;
  }
  throw ConfigError("no bundled scenario named '" + name + "' (fig2a, fig3c)");
}

double steady_state_max_deviation(double linewidth_hz, double max_detuning_hz, double t_min_s,
                                  double t_max_s) {
  const double bfs = 10.8e9;
  const double width = t_max_s * 2.0;
  const ComplexRate g0 = detuning_parameter(bfs, bfs, linewidth_hz);
  std::vector<double> detunings = arange(-max_detuning_hz, max_detuning_hz, max_detuning_hz / 240.0);
  std::vector<double> times = arange(t_min_s, t_max_s, (t_max_s - t_min_s) / 400.0);
  times.push_back(t_max_s);
  double worst = 0.0;
  for (double d : detunings) {
    const ComplexRate g = detuning_parameter(bfs, bfs + d, linewidth_hz);
    for (double t : times)
      worst = std::max(worst, std::abs(envelope(g, width, t) - envelope(g0, width, t)));
  }
  return worst;
}

DistortionCase run_distortion_case(const ScenarioConfig& scenario, BgsMap* raw_map,
                                   BgsMap* recovered_map) {
  scenario.validate();
  DistortionCase out{scenario.pulse_scheme(), scenario.fiber_profile(), {}, {}, 0.0, 5.0, {}, {}, 0.0, 0.0, 0};
  const BgsMap raw = simulate_bgs(out.fiber, out.pulse, scenario.frequency_sweep(),
                                  scenario.sampling_grid(), scenario.noise_spec());
  const double lw = out.fiber.linewidth_hz();
  const DeconvKernel kernel =
      out.pulse.kind == PulseKind::Pair
          ? dpp_kernel(out.pulse, lw, raw.grid(), scenario.kernel_options())
          : peak_envelope_kernel(out.pulse, lw, raw.grid(), scenario.deconv.kernel_sampling);
  const RecoveredMap rec = tv_deconvolve(raw, kernel, scenario.solver_config());
  for (const DeconvDiagnostics& d : rec.diagnostics) out.unconverged_channels += d.converged ? 0 : 1;
  if (raw_map) *raw_map = raw;
  if (recovered_map) *recovered_map = rec.map;
  out.raw = bfs_profile(raw);
  out.recovered = bfs_profile(rec.map);
  out.pre_hotspot_error_hz = max_pre_hotspot_error(out.recovered, out.fiber, out.pre_hotspot_length_m);
  for (std::size_t h = 0; h < out.fiber.hotspots().size(); ++h) {
    const Hotspot& hs = out.fiber.hotspots()[h];
    out.degradations_hz.push_back(bfs_degradation(out.recovered, out.fiber, h));
    out.hotspot_max_error_hz.push_back(
        max_systematic_error(out.recovered, out.fiber, hs.start_m, hs.end_m()));
  }
  const double margin = 1.5;
  out.fwhm_min_hz = std::numeric_limits<double>::infinity();
  out.fwhm_max_hz = -std::numeric_limits<double>::infinity();
  for (const FiberSegment& s : out.fiber.segments()) {
    const double lo = std::max(s.start_m, 0.0) + margin, hi = s.end_m - margin;
    for (const BfsPoint& p : out.recovered.points) {
      if (p.position_m < lo || p.position_m > hi || !p.fit_ok) continue;
      out.fwhm_min_hz = std::min(out.fwhm_min_hz, p.fwhm_hz);
      out.fwhm_max_hz = std::max(out.fwhm_max_hz, p.fwhm_hz);
    }
  }
  return out;
}

ResolutionScenario resolution_scenario(const ExperimentOptions& options) {
  ResolutionScenario sc;
  sc.snr_convention = SnrConvention::Ratio;
  sc.realizations = options.realizations.value_or(100);
  sc.seed = options.seed;
  return sc;
}

std::vector<RatePoint> run_sampling_rate_study(const ResolutionScenario& scenario,
                                               const std::vector<double>& rates_hz,
                                               double target_snr_db, double hotspot_length_m) {
  std::vector<RatePoint> out;
  for (double rate : rates_hz) {
    ResolutionScenario sc = scenario;
    sc.sample_rate_hz = rate;
    const HotspotStudy study(sc, hotspot_length_m);
    RatePoint p;
    p.sample_rate_hz = rate;
    p.input_snr_db = study.input_snr_db();
    p.search = search_mu_for_snr(study, target_snr_db);
    p.evaluation = study.evaluate(p.search.best.mu);
    p.averaged = p.evaluation.averaged_profile;
    out.push_back(std::move(p));
  }
  return out;
}

Gate gate_distortion_reproduced(const DistortionCase& single) {
  const double pre = single.pre_hotspot_error_hz;
  const bool pre_ok = std::abs(pre - 4.8e6) <= 1.5e6;
  const bool h1 = single.hotspot_max_error_hz.at(1) > 5e6;
  const bool h2 = single.hotspot_max_error_hz.at(2) > 5e6;
  return {"single-pulse distortion reproduced", pre_ok && h1 && h2,
          fmt::format("pre-hotspot max error {} (target 4.8 +- 1.5 MHz, {}); max hotspot error "
                      "1 m: {} ({}), 0.5 m: {} ({}; both must exceed 5 MHz)",
                      mhz(pre), pre_ok ? "ok" : "out of range", mhz(single.hotspot_max_error_hz[1]),
                      h1 ? "ok" : "within 5 MHz", mhz(single.hotspot_max_error_hz[2]),
                      h2 ? "ok" : "within 5 MHz")};
}

Gate gate_distortion_eliminated(const DistortionCase& pair) {
  bool ok = pair.pre_hotspot_error_hz < 0.5e6;
  std::string steps;
  for (double d : pair.degradations_hz) {
    ok = ok && std::abs(d) <= 0.5e6;
    steps += (steps.empty() ? "" : ", ") + mhz(d);
  }
  return {"DPP pipeline distortion-free", ok,
          fmt::format("hotspot degradations [{}] (each within 0.5 MHz); pre-hotspot max error {} "
                      "(< 0.5 MHz)",
                      steps, mhz(pair.pre_hotspot_error_hz))};
}

Gate gate_lorentzian_width(const DistortionCase& pair) {
  const bool ok = pair.fwhm_min_hz >= 26e6 && pair.fwhm_max_hz <= 30e6;
  return {"recovered BGS FWHM on uniform sections", ok,
          fmt::format("FWHM range [{}, {}] (must lie in [26, 30] MHz)", mhz(pair.fwhm_min_hz),
                      mhz(pair.fwhm_max_hz))};
}

Gate gate_snr_resolution(const std::vector<ResolutionPoint>& t01,
                         const std::vector<ResolutionPoint>& t05) {
  if (t01.size() < 2 || t05.size() < 2) return {"SNR improvement vs resolution", false, "too few points"};
  bool monotone = true;
  for (std::size_t i = 1; i < t01.size(); ++i)
    monotone = monotone && t01[i].improvement_db() >= t01[i - 1].improvement_db();
  struct Check {
    const ResolutionPoint& p;
    double target, tol;
  };
  const Check checks[] = {{t01.front(), 0.78, 2.0}, {t01.back(), 8.61, 2.0},
                          {t05.front(), 7.70, 2.5}, {t05.back(), 16.39, 2.5}};
  bool ok = monotone;
  std::string detail = fmt::format("improvement monotone at 0.1 MHz: {}", monotone ? "yes" : "no");
  for (std::size_t i = 0; i < 4; ++i) {
    const Check& c = checks[i];
    const bool pass = std::abs(c.p.improvement_db() - c.target) <= c.tol;
    ok = ok && pass;
    detail += fmt::format("; {} MHz, {:g} m: {:.2f} dB (target {:.2f} +- {:.1f}, {})",
                          i < 2 ? "0.1" : "0.5", c.p.hotspot_length_m, c.p.improvement_db(),
                          c.target, c.tol, pass ? "ok" : "out of range");
  }
  return {"SNR improvement vs resolution", ok, detail};
}

Gate gate_sampling_rate(const std::vector<RatePoint>& points) {
  const std::map<double, double> reference{{0.5e9, 2.34e6}, {1e9, 0.56e6}, {2e9, 0.22e6}, {5e9, 0.03e6}};
  bool decreasing = true, ok = true;
  std::string detail;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const RatePoint& p = points[i];
    const double d = p.evaluation.degradation_hz;
    if (i > 0) decreasing = decreasing && d < points[i - 1].evaluation.degradation_hz;
    const auto it = reference.find(p.sample_rate_hz);
    bool within = false;
    if (it != reference.end()) within = std::abs(d - it->second) <= 0.5 * it->second;
    ok = ok && within;
    detail += fmt::format("{}{:g} GSa/s: {} (target {}, {})", i ? "; " : "", p.sample_rate_hz / 1e9,
                          mhz(d), it != reference.end() ? mhz(it->second) : std::string("n/a"),
                          within ? "ok" : "outside 50%");
  }
  detail += fmt::format("; strictly decreasing: {}", decreasing ? "yes" : "no");
  return {"degradation vs sampling rate", ok && decreasing, detail};
}

MuSearchResult select_mu_for_tolerance(const ScenarioConfig& config, double resolution_m) {
  config.validate();
  if (config.pulse.kind != PulseKind::Pair)
    throw ConfigError("tolerance mode needs a pulse pair");
  if (!config.noise.snr_db || std::isinf(*config.noise.snr_db))
    throw ConfigError("tolerance mode needs noise.snr_db (the input SNR the mu must suit)");
  ResolutionScenario sc;
  sc.pulse = config.pulse_scheme();
  sc.linewidth_hz = config.fiber.linewidth_mhz * 1e6;
  sc.base_bfs_hz = config.fiber.base_bfs_ghz * 1e9;
  sc.sample_rate_hz = config.grid.sample_rate_gsps * 1e9;
  sc.input_snr_db = *config.noise.snr_db;
  sc.snr_convention = config.noise.convention;
  sc.realizations = config.noise.realizations;
  sc.seed = config.noise.seed;
  sc.sampling = config.deconv.kernel_sampling;
  sc.sweep = {sc.base_bfs_hz - 60e6, 4e6, 38};
  return search_mu_for_degradation(HotspotStudy(sc, resolution_m), config.deconv.tolerance_mhz * 1e6);
}

}  // namespace botda
