#include "botda/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "botda/errors.hpp"

namespace botda {

namespace {

// exp(z) - 1 without cancellation for small |z|.
std::complex<double> expm1_complex(std::complex<double> z) {
  const double x = z.real();
  const double y = z.imag();
  const double s = std::sin(0.5 * y);
  const double re = std::expm1(x) * std::cos(y) - 2.0 * s * s;
  const double im = std::exp(x) * std::sin(y);
  return {re, im};
}

}  // namespace

FiberProfile::FiberProfile(double length_m, double base_bfs_hz, std::vector<Hotspot> hotspots,
                           double linewidth_hz, double gain_scale)
    : length_m_(length_m),
      base_bfs_hz_(base_bfs_hz),
      hotspots_(std::move(hotspots)),
      linewidth_hz_(linewidth_hz),
      gain_scale_(gain_scale) {
  if (!(length_m_ > 0.0)) throw DomainError("fiber length must be positive");
  if (!(base_bfs_hz_ > 0.0)) throw DomainError("base BFS must be positive");
  if (!(linewidth_hz_ > 0.0)) throw DomainError("Brillouin linewidth must be positive");
  if (!std::isfinite(gain_scale_)) throw DomainError("gain scale must be finite");
  double previous_end = 0.0;
  for (std::size_t i = 0; i < hotspots_.size(); ++i) {
    const Hotspot& h = hotspots_[i];
    std::ostringstream where;
    where << "hotspot " << i << " [" << h.start_m << ", " << h.end_m() << "] m";
    if (!(h.length_m > 0.0)) throw DomainError(where.str() + ": length must be positive");
    if (!(h.bfs_hz > 0.0)) throw DomainError(where.str() + ": BFS must be positive");
    if (h.start_m < 0.0 || h.end_m() > length_m_)
      throw DomainError(where.str() + ": outside the fiber");
    if (h.start_m < previous_end)
      throw DomainError(where.str() + ": hotspots must be sorted and non-overlapping");
    previous_end = h.end_m();
  }
}

double FiberProfile::bfs_at(double z_m) const {
  for (const Hotspot& h : hotspots_) {
    if (z_m >= h.start_m && z_m < h.end_m()) return h.bfs_hz;
  }
  return base_bfs_hz_;
}

std::vector<FiberSegment> FiberProfile::segments() const {
  std::vector<FiberSegment> out;
  double cursor = 0.0;
  for (const Hotspot& h : hotspots_) {
    if (h.start_m > cursor) out.push_back({cursor, h.start_m, base_bfs_hz_});
    out.push_back({h.start_m, h.end_m(), h.bfs_hz});
    cursor = h.end_m();
  }
  if (cursor < length_m_) out.push_back({cursor, length_m_, base_bfs_hz_});
  return out;
}

double FiberProfile::min_bfs_hz() const {
  double v = base_bfs_hz_;
  for (const Hotspot& h : hotspots_) v = std::min(v, h.bfs_hz);
  return v;
}

double FiberProfile::max_bfs_hz() const {
  double v = base_bfs_hz_;
  for (const Hotspot& h : hotspots_) v = std::max(v, h.bfs_hz);
  return v;
}

FiberProfile FiberProfile::with_gain_scale(double gain_scale) const {
  return FiberProfile(length_m_, base_bfs_hz_, hotspots_, linewidth_hz_, gain_scale);
}

FiberProfile FiberProfile::shifted_hotspots(double dz_m) const {
  std::vector<Hotspot> moved = hotspots_;
  for (Hotspot& h : moved) h.start_m += dz_m;
  return FiberProfile(length_m_, base_bfs_hz_, std::move(moved), linewidth_hz_, gain_scale_);
}

void SamplingGrid::validate() const {
  if (!(dt_s > 0.0)) throw DomainError("sample interval must be positive");
  if (!(group_velocity_m_per_s > 0.0)) throw DomainError("group velocity must be positive");
  if (n_samples < 2) throw DomainError("a trace needs at least two samples");
}

SamplingGrid SamplingGrid::covering(double fiber_length_m, double lead_s, double sample_rate_hz,
                                    double group_velocity_m_per_s) {
  if (!(sample_rate_hz > 0.0)) throw DomainError("sample rate must be positive");
  if (!(fiber_length_m > 0.0)) throw DomainError("fiber length must be positive");
  if (lead_s < 0.0) throw DomainError("lead-in must be non-negative");
  SamplingGrid g;
  g.dt_s = 1.0 / sample_rate_hz;
  g.group_velocity_m_per_s = group_velocity_m_per_s;
  const auto lead_samples = static_cast<std::size_t>(std::ceil(lead_s / g.dt_s - 1e-9));
  const double round_trip_s = 2.0 * fiber_length_m / group_velocity_m_per_s;
  const auto body = static_cast<std::size_t>(std::ceil(round_trip_s / g.dt_s - 1e-9));
  g.n_samples = 2 * lead_samples + body + 1;
  g.t0_s = -static_cast<double>(lead_samples) * g.dt_s;
  g.validate();
  return g;
}

PulseScheme PulseScheme::single(double width_s) {
  PulseScheme p{PulseKind::Single, width_s, 0.0};
  p.validate();
  return p;
}

PulseScheme PulseScheme::pair(double width_long_s, double width_short_s) {
  PulseScheme p{PulseKind::Pair, width_long_s, width_short_s};
  p.validate();
  return p;
}

void PulseScheme::validate() const {
  if (!(width_long_s > 0.0)) throw DomainError("pulse width must be positive");
  if (kind == PulseKind::Pair && !(width_short_s > 0.0 && width_short_s < width_long_s))
    throw DomainError("pulse pair needs 0 < short width < long width");
}

double PulseScheme::effective_resolution_m(double group_velocity_m_per_s) const {
  const double span = kind == PulseKind::Single ? width_long_s : width_long_s - width_short_s;
  return group_velocity_m_per_s * span / 2.0;
}

ComplexRate detuning_parameter(double bfs_hz, double probe_offset_hz, double linewidth_hz) {
  if (!(bfs_hz > 0.0) || !(probe_offset_hz > 0.0) || !(linewidth_hz > 0.0))
    throw DomainError("detuning parameter needs positive BFS, probe offset and linewidth");
  const double pi = std::numbers::pi;
  // (nu_B - nu)(nu_B + nu) keeps the small difference exact.
  const double diff = bfs_hz - probe_offset_hz;
  const double sum = bfs_hz + probe_offset_hz;
  return {pi * linewidth_hz, pi * diff * sum / probe_offset_hz};
}

std::complex<double> envelope(const ComplexRate& gamma, double pulse_width_s, double t_s) {
  if (t_s < 0.0 || t_s >= pulse_width_s) return {0.0, 0.0};
  return -expm1_complex(-gamma.conj() * t_s);
}

std::complex<double> envelope_integral(const ComplexRate& gamma, double pulse_width_s, double a_s,
                                       double b_s) {
  const double lo = std::max(a_s, 0.0);
  const double hi = std::min(b_s, pulse_width_s);
  if (!(hi > lo)) return {0.0, 0.0};
  const std::complex<double> c = gamma.conj();
  // (hi - lo) + (exp(-c hi) - exp(-c lo)) / c
  const std::complex<double> tail = std::exp(-c * lo) * expm1_complex(-c * (hi - lo)) / c;
  return (hi - lo) + tail;
}

std::complex<double> impulse_response_density_at(double bfs_hz, double probe_offset_hz,
                                                  double linewidth_hz, double gain_scale) {
  const ComplexRate g = detuning_parameter(bfs_hz, probe_offset_hz, linewidth_hz);
  return gain_scale / (2.0 * g.conj());
}

std::complex<double> impulse_response_density(const FiberProfile& fiber, double z_m,
                                              double probe_offset_hz) {
  if (z_m < 0.0 || z_m > fiber.length_m())
    throw DomainError("position outside the fiber");
  return impulse_response_density_at(fiber.bfs_at(z_m), probe_offset_hz, fiber.linewidth_hz(),
                                     fiber.gain_scale());
}

}  // namespace botda
