#include "botda/simulator.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "botda/dpp.hpp"
#include "botda/errors.hpp"
#include "botda/log.hpp"
#include "botda/parallel.hpp"

namespace botda {

void GainTrace::validate() const {
  grid.validate();
  if (samples.size() != grid.n_samples)
    throw ContractError("trace has " + std::to_string(samples.size()) + " samples, grid expects " +
                        std::to_string(grid.n_samples));
}

std::vector<double> BgsMap::spectrum_at(std::size_t sample) const {
  std::vector<double> out(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) out[i] = traces[i].samples.at(sample);
  return out;
}

std::vector<double> BgsMap::frequencies() const {
  std::vector<double> out(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) out[i] = traces[i].probe_offset_hz;
  return out;
}

void BgsMap::validate() const {
  if (traces.empty()) throw ContractError("BGS map has no traces");
  if (sweep.count != traces.size()) throw ContractError("sweep count does not match trace count");
  if (traces.size() > 1 && !(sweep.step_hz > 0.0))
    throw ContractError("frequency axis must be strictly increasing");
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const GainTrace& t = traces[i];
    t.validate();
    if (!(t.grid == traces.front().grid)) throw ContractError("traces do not share one grid");
    if (!(t.meta.pulse == traces.front().meta.pulse) ||
        t.meta.normalized != traces.front().meta.normalized ||
        t.meta.recovered != traces.front().meta.recovered)
      throw ContractError("traces do not share pulse metadata");
    if (t.probe_offset_hz != sweep.at(i))
      throw ContractError("trace " + std::to_string(i) + " frequency is off the sweep axis");
  }
}

GainTrace simulate_trace(const FiberProfile& fiber, const PulseScheme& pulse,
                         double probe_offset_hz, const SamplingGrid& grid) {
  pulse.validate();
  if (pulse.kind != PulseKind::Single)
    throw ContractError("simulate_trace takes a single pulse; use the DPP module for pairs");
  grid.validate();
  const double v = grid.group_velocity_m_per_s;
  const double width = pulse.width_long_s;
  const double t_end = grid.time_at(grid.n_samples - 1);
  const double eps = 1e-6 * grid.dt_s;
  if (grid.t0_s > -width + eps || t_end < 2.0 * fiber.length_m() / v + width - eps) {
    std::ostringstream msg;
    msg << "grid [" << grid.t0_s << ", " << t_end << "] s does not contain the fiber round trip"
        << " plus one pulse width of lead-in and lead-out";
    throw ConfigError(msg.str());
  }

  struct Section {
    double t_near;  // 2a/V
    double t_far;   // 2b/V
    ComplexRate gamma;
    std::complex<double> weight;  // h * V/2
  };
  std::vector<Section> sections;
  for (const FiberSegment& s : fiber.segments()) {
    const ComplexRate g = detuning_parameter(s.bfs_hz, probe_offset_hz, fiber.linewidth_hz());
    const std::complex<double> h = fiber.gain_scale() / (2.0 * g.conj());
    sections.push_back({2.0 * s.start_m / v, 2.0 * s.end_m / v, g, h * (v / 2.0)});
  }

  GainTrace out;
  out.probe_offset_hz = probe_offset_hz;
  out.grid = grid;
  out.meta.pulse = pulse;
  out.samples.assign(grid.n_samples, 0.0);
  for (std::size_t k = 0; k < grid.n_samples; ++k) {
    const double t = grid.time_at(k);
    if (t <= 0.0) continue;
    std::complex<double> acc{0.0, 0.0};
    for (const Section& s : sections) {
      // z in [a, b] maps to envelope time s = t - 2z/V in [t - 2b/V, t - 2a/V].
      const double lo = t - s.t_far;
      const double hi = t - s.t_near;
      if (hi <= 0.0 || lo >= width) continue;
      acc += s.weight * envelope_integral(s.gamma, width, lo, hi);
    }
    out.samples[k] = acc.real();
  }
  return out;
}

double reference_plateau(const PulseScheme& pulse, double linewidth_hz, double gain_scale,
                         double group_velocity_m_per_s) {
  pulse.validate();
  const ComplexRate g0{std::numbers::pi * linewidth_hz, 0.0};
  const std::complex<double> h0 = gain_scale / (2.0 * g0.conj());
  auto plateau = [&](double width) {
    return (group_velocity_m_per_s / 2.0 * h0 * envelope_integral(g0, width, 0.0, width)).real();
  };
  if (pulse.kind == PulseKind::Single) return plateau(pulse.width_long_s);
  return plateau(pulse.width_long_s) - plateau(pulse.width_short_s);
}

GainTrace normalize_trace(GainTrace trace, const FiberProfile& fiber) {
  if (trace.meta.normalized) return trace;
  const double plateau = reference_plateau(trace.meta.pulse, fiber.linewidth_hz(),
                                           fiber.gain_scale(), trace.grid.group_velocity_m_per_s);
  if (!(std::abs(plateau) > 0.0)) throw ContractError("cannot normalize a zero-gain trace");
  for (double& s : trace.samples) s /= plateau;
  trace.meta.normalized = true;
  return trace;
}

GainTrace simulate_normalized_trace(const FiberProfile& fiber, const PulseScheme& pulse,
                                    double probe_offset_hz, const SamplingGrid& grid) {
  if (pulse.kind == PulseKind::Single)
    return normalize_trace(simulate_trace(fiber, pulse, probe_offset_hz, grid), fiber);
  const GainTrace lng =
      simulate_trace(fiber, PulseScheme::single(pulse.width_long_s), probe_offset_hz, grid);
  const GainTrace shrt =
      simulate_trace(fiber, PulseScheme::single(pulse.width_short_s), probe_offset_hz, grid);
  return normalize_trace(differential_trace(lng, shrt), fiber);
}

std::optional<std::string> sweep_coverage_warning(const FiberProfile& fiber,
                                                  const FrequencySweep& sweep) {
  const double margin = 2.0 * fiber.linewidth_hz();
  const double need_lo = fiber.min_bfs_hz() - margin;
  const double need_hi = fiber.max_bfs_hz() + margin;
  if (sweep.start_hz <= need_lo && sweep.last_hz() >= need_hi) return std::nullopt;
  std::ostringstream msg;
  msg << "sweep [" << sweep.start_hz << ", " << sweep.last_hz() << "] Hz does not cover ["
      << need_lo << ", " << need_hi << "] Hz; Lorentzian fits may fail";
  return msg.str();
}

BgsMap simulate_bgs(const FiberProfile& fiber, const PulseScheme& pulse,
                    const FrequencySweep& sweep, const SamplingGrid& grid,
                    const std::optional<NoiseSpec>& noise) {
  if (sweep.count == 0) throw ConfigError("frequency sweep is empty");
  if (sweep.count > 1 && !(sweep.step_hz > 0.0))
    throw ConfigError("frequency sweep must be strictly increasing");
  if (auto warning = sweep_coverage_warning(fiber, sweep)) log_warning(*warning);

  BgsMap map;
  map.sweep = sweep;
  map.traces.resize(sweep.count);
  parallel_for(sweep.count, [&](std::size_t i) {
    GainTrace t = simulate_normalized_trace(fiber, pulse, sweep.at(i), grid);
    if (noise) {
      t = add_noise(std::move(t), NoiseSpec{noise->target_snr_db, derive_seed(noise->seed, i), noise->convention});
      t.meta.seed = noise->seed;
    }
    map.traces[i] = std::move(t);
  });
  return map;
}

double noise_sigma(double amplitude, double snr_db, SnrConvention convention) {
  if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;
  if (!std::isfinite(snr_db)) throw DomainError("target SNR must be finite or +infinity");
  return amplitude / snr_db_to_ratio(snr_db, convention);
}

GainTrace add_noise(GainTrace trace, const NoiseSpec& noise, std::optional<double> amplitude_override) {
  double amplitude = 1.0;
  if (amplitude_override) {
    amplitude = *amplitude_override;
  } else if (!trace.meta.normalized) {
    throw ContractError("add_noise needs a normalized trace or an explicit plateau amplitude");
  }
  const double sigma = noise_sigma(amplitude, noise.target_snr_db, noise.convention);
  trace.meta.seed = noise.seed;
  if (sigma == 0.0) return trace;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (double& s : trace.samples) s += gauss(rng);
  return trace;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over a mix of both inputs
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace botda
