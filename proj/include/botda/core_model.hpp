#pragma once

// Closed-form quantities of the pump/probe Brillouin interaction: the complex
// detuning rate, the gated temporal envelope of the induced gain and the local
// impulse response. Everything here is a pure function.

#include <complex>
#include <cstddef>
#include <vector>

namespace botda {

inline constexpr double kDefaultLinewidthHz = 27e6;
inline constexpr double kDefaultGroupVelocity = 2.0e8;  // m/s

struct Hotspot {
  double start_m = 0.0;
  double length_m = 0.0;
  double bfs_hz = 0.0;

  double end_m() const { return start_m + length_m; }
  bool operator==(const Hotspot&) const = default;
};

/// Section of fiber with a constant Brillouin frequency shift.
struct FiberSegment {
  double start_m;
  double end_m;
  double bfs_hz;
};

/// Piecewise-constant BFS map of a sensing fiber plus the Brillouin linewidth
/// and the lumped gain constant.
class FiberProfile {
 public:
  FiberProfile(double length_m, double base_bfs_hz, std::vector<Hotspot> hotspots = {},
               double linewidth_hz = kDefaultLinewidthHz, double gain_scale = 1.0);

  double length_m() const { return length_m_; }
  double base_bfs_hz() const { return base_bfs_hz_; }
  double linewidth_hz() const { return linewidth_hz_; }
  double gain_scale() const { return gain_scale_; }
  const std::vector<Hotspot>& hotspots() const { return hotspots_; }

  /// Base BFS outside hotspots, the hotspot value inside ([start, end)).
  double bfs_at(double z_m) const;

  /// Ordered constant-BFS sections covering [0, length_m].
  std::vector<FiberSegment> segments() const;

  double min_bfs_hz() const;
  double max_bfs_hz() const;

  FiberProfile with_gain_scale(double gain_scale) const;
  FiberProfile shifted_hotspots(double dz_m) const;

  bool operator==(const FiberProfile&) const = default;

 private:
  double length_m_;
  double base_bfs_hz_;
  std::vector<Hotspot> hotspots_;
  double linewidth_hz_;
  double gain_scale_;
};

/// Uniform time sampling of a detected trace. Sample k is taken at
/// t_k = t0_s + k * dt_s; the two-way mapping puts it at z_k = V_g * t_k / 2.
struct SamplingGrid {
  double dt_s = 1e-9;
  double group_velocity_m_per_s = kDefaultGroupVelocity;
  std::size_t n_samples = 2;
  double t0_s = 0.0;

  double dz_m() const { return group_velocity_m_per_s * dt_s / 2.0; }
  double sample_rate_hz() const { return 1.0 / dt_s; }
  double time_at(std::size_t k) const { return t0_s + static_cast<double>(k) * dt_s; }
  double position_at(std::size_t k) const { return group_velocity_m_per_s * time_at(k) / 2.0; }

  /// Throws DomainError when dt_s <= 0, V_g <= 0 or n_samples < 2.
  void validate() const;

  /// Grid that starts `lead_s` before the pulse enters the fiber and ends
  /// `lead_s` after the last round trip. `lead_s` is rounded up to whole samples
  /// so that t = 0 falls exactly on a sample.
  static SamplingGrid covering(double fiber_length_m, double lead_s, double sample_rate_hz,
                               double group_velocity_m_per_s = kDefaultGroupVelocity);

  bool operator==(const SamplingGrid&) const = default;
};

enum class PulseKind { Single, Pair };

struct PulseScheme {
  PulseKind kind = PulseKind::Single;
  double width_long_s = 0.0;
  double width_short_s = 0.0;  // Pair only

  static PulseScheme single(double width_s);
  static PulseScheme pair(double width_long_s, double width_short_s);

  void validate() const;

  /// Single: V_g T_p / 2. Pair: V_g (T_long - T_short) / 2.
  double effective_resolution_m(double group_velocity_m_per_s = kDefaultGroupVelocity) const;

  bool operator==(const PulseScheme&) const = default;
};

/// Complex rate Gamma_A (units 1/s).
struct ComplexRate {
  double real_part = 0.0;
  double imag_part = 0.0;

  std::complex<double> value() const { return {real_part, imag_part}; }
  std::complex<double> conj() const { return {real_part, -imag_part}; }
};

/// Gamma_A = i*pi*(nu_B^2 - nu^2 - i*nu*dnu_B) / nu. Real part is pi*dnu_B.
ComplexRate detuning_parameter(double bfs_hz, double probe_offset_hz, double linewidth_hz);

/// {1 - exp(-conj(Gamma) t)} gated to [0, T_p).
std::complex<double> envelope(const ComplexRate& gamma, double pulse_width_s, double t_s);

/// Integral of `envelope` over [a_s, b_s] (the gate is applied, a_s <= b_s).
std::complex<double> envelope_integral(const ComplexRate& gamma, double pulse_width_s,
                                       double a_s, double b_s);

/// kappa / (2 conj(Gamma)) at position z, per meter of fiber.
std::complex<double> impulse_response_density(const FiberProfile& fiber, double z_m,
                                              double probe_offset_hz);

/// Same density for an explicit local BFS (no position lookup).
std::complex<double> impulse_response_density_at(double bfs_hz, double probe_offset_hz,
                                                 double linewidth_hz, double gain_scale);

}  // namespace botda
