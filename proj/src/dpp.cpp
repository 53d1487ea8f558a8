#include "botda/dpp.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "botda/errors.hpp"

namespace botda {

std::size_t DeconvKernel::first_nonzero() const {
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i] != 0.0) return i;
  return 0;
}

std::size_t DeconvKernel::last_nonzero() const {
  for (std::size_t i = samples.size(); i > 0; --i)
    if (samples[i - 1] != 0.0) return i - 1;
  return 0;
}

double DeconvKernel::position_offset_samples() const {
  return source.sampling == KernelSampling::CellAverage ? 0.5 : 0.0;
}

double min_pair_short_width_s(double linewidth_hz) {
  if (!(linewidth_hz > 0.0)) throw DomainError("linewidth must be positive");
  return 1.08 / linewidth_hz;
}

double cancellation_bound(double width_s, double linewidth_hz) {
  return 2.0 * std::exp(-std::numbers::pi * linewidth_hz * width_s);
}

std::complex<double> pair_envelope(const ComplexRate& gamma, const PulseScheme& pair, double t_s) {
  return envelope(gamma, pair.width_long_s, t_s) - envelope(gamma, pair.width_short_s, t_s);
}

GainTrace differential_trace(const GainTrace& long_trace, const GainTrace& short_trace) {
  long_trace.validate();
  short_trace.validate();
  if (!(long_trace.grid == short_trace.grid))
    throw ContractError("differential_trace: traces are on different grids");
  if (long_trace.probe_offset_hz != short_trace.probe_offset_hz)
    throw ContractError("differential_trace: traces have different probe offsets");
  if (long_trace.meta.pulse.kind != PulseKind::Single ||
      short_trace.meta.pulse.kind != PulseKind::Single)
    throw ContractError("differential_trace: both inputs must be single-pulse traces");
  if (long_trace.meta.normalized != short_trace.meta.normalized)
    throw ContractError("differential_trace: cannot mix normalized and raw traces");
  if (!(long_trace.meta.pulse.width_long_s > short_trace.meta.pulse.width_long_s))
    throw ContractError("differential_trace: long pulse must be wider than short pulse");

  GainTrace out = long_trace;
  out.meta.pulse =
      PulseScheme::pair(long_trace.meta.pulse.width_long_s, short_trace.meta.pulse.width_long_s);
  out.meta.normalized = false;
  out.meta.seed.reset();
  for (std::size_t k = 0; k < out.samples.size(); ++k)
    out.samples[k] = long_trace.samples[k] - short_trace.samples[k];
  return out;
}

BgsMap differential_map(const BgsMap& long_map, const BgsMap& short_map) {
  if (long_map.n_freqs() != short_map.n_freqs() || !(long_map.sweep == short_map.sweep))
    throw ContractError("differential_map: frequency axes differ");
  BgsMap out;
  out.sweep = long_map.sweep;
  out.traces.reserve(long_map.n_freqs());
  for (std::size_t i = 0; i < long_map.n_freqs(); ++i)
    out.traces.push_back(differential_trace(long_map.traces[i], short_map.traces[i]));
  return out;
}

std::vector<double> raw_peak_envelope_samples(const PulseScheme& pulse, double linewidth_hz,
                                              const SamplingGrid& grid, KernelSampling sampling) {
  pulse.validate();
  grid.validate();
  const ComplexRate g0{std::numbers::pi * linewidth_hz, 0.0};
  const double dt = grid.dt_s;
  const double width = pulse.width_long_s;
  // One extra tap so the cell that straddles T_long is kept.
  const auto taps = static_cast<std::size_t>(std::ceil(width / dt - 1e-9)) + 2;
  std::vector<double> out(taps, 0.0);
  for (std::size_t m = 0; m < taps; ++m) {
    const double t = static_cast<double>(m) * dt;
    if (sampling == KernelSampling::Point) {
      // m * dt can land a rounding error short of a gate edge.
      auto snap = [&](double w) { return std::abs(t - w) < 1e-6 * dt ? w : t; };
      double v = envelope(g0, width, snap(width)).real();
      if (pulse.kind == PulseKind::Pair)
        v -= envelope(g0, pulse.width_short_s, snap(pulse.width_short_s)).real();
      out[m] = v;
    } else {
      std::complex<double> area = envelope_integral(g0, width, t - dt, t);
      if (pulse.kind == PulseKind::Pair)
        area -= envelope_integral(g0, pulse.width_short_s, t - dt, t);
      out[m] = area.real() / dt;
    }
  }
  while (out.size() > 1 && out.back() == 0.0) out.pop_back();
  return out;
}

DeconvKernel peak_envelope_kernel(const PulseScheme& pulse, double linewidth_hz,
                                  const SamplingGrid& grid, KernelSampling sampling) {
  DeconvKernel k;
  k.samples = raw_peak_envelope_samples(pulse, linewidth_hz, grid, sampling);
  k.dt_s = grid.dt_s;
  k.origin_index = 0;
  k.source = {pulse, linewidth_hz, sampling};
  double sum = 0.0;
  for (double s : k.samples) sum += s;
  if (!(sum > 0.0)) throw DomainError("kernel has no positive area");
  k.raw_sum = sum;
  for (double& s : k.samples) s /= sum;
  return k;
}

void check_pair_widths(const PulseScheme& pair, double linewidth_hz, bool allow_short_pair) {
  if (pair.kind != PulseKind::Pair || allow_short_pair) return;
  const double min_short = min_pair_short_width_s(linewidth_hz);
  if (pair.width_short_s < min_short * (1.0 - 1e-9)) {
    std::ostringstream msg;
    msg << "pulse pair " << pair.width_long_s * 1e9 << "/" << pair.width_short_s * 1e9
        << " ns: both widths must be at least " << min_short * 1e9
        << " ns (1.08 / linewidth) so the temporal envelope reaches steady state before the"
        << " pulses are subtracted; use --allow-short-pair to override";
    throw ValidationError(msg.str());
  }
}

DeconvKernel dpp_kernel(const PulseScheme& pair, double linewidth_hz, const SamplingGrid& grid,
                        const KernelOptions& options) {
  pair.validate();
  if (pair.kind != PulseKind::Pair) throw ContractError("dpp_kernel needs a pulse pair");
  check_pair_widths(pair, linewidth_hz, options.allow_short_pair);
  return peak_envelope_kernel(pair, linewidth_hz, grid, options.sampling);
}

}  // namespace botda
