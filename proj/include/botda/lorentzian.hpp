#pragma once

#include <span>
#include <string>

namespace botda {

/// g(nu) = peak / (1 + ((nu - center) / (fwhm / 2))^2)
double lorentzian(double nu_hz, double peak, double center_hz, double fwhm_hz);

struct LorentzianFit {
  double bfs_hz = 0.0;
  double fwhm_hz = 0.0;
  double peak_gain = 0.0;
  double residual_rms = 0.0;
  int iterations = 0;
  bool ok = false;
  /// Reason when !ok.
  std::string failure;
};

struct LorentzianFitOptions {
  int max_iters = 200;
  /// Fit only samples within this many half-height widths of the maximum
  /// (<= 0 uses the whole spectrum).
  double window_fwhm = 0.0;
};

/// Damped least-squares (Levenberg-Marquardt) fit with an analytic Jacobian,
/// started from the maximum sample and the half-height crossings.
LorentzianFit fit_lorentzian(std::span<const double> freqs_hz, std::span<const double> gains,
                             const LorentzianFitOptions& options = {});

}  // namespace botda
