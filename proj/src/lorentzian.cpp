#include "botda/lorentzian.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace botda {

namespace {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

bool solve3(Mat3 a, Vec3 b, Vec3& x) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-300) return false;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < 3; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return true;
}

LorentzianFit failed(std::string why) {
  LorentzianFit f;
  f.ok = false;
  f.failure = std::move(why);
  return f;
}

// Linear interpolation of the half-height crossing between samples i and j.
double crossing(double xi, double gi, double xj, double gj, double level) {
  if (gi == gj) return 0.5 * (xi + xj);
  return xi + (level - gi) * (xj - xi) / (gj - gi);
}

}  // namespace

double lorentzian(double nu_hz, double peak, double center_hz, double fwhm_hz) {
  const double q = (nu_hz - center_hz) / (0.5 * fwhm_hz);
  return peak / (1.0 + q * q);
}

LorentzianFit fit_lorentzian(std::span<const double> freqs_hz, std::span<const double> gains,
                             const LorentzianFitOptions& options) {
  const std::size_t n = freqs_hz.size();
  if (n != gains.size()) return failed("frequency and gain lengths differ");
  if (n < 7) return failed("need at least 7 frequency samples");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(gains[i]) || !std::isfinite(freqs_hz[i])) return failed("non-finite sample");

  const auto imax = static_cast<std::size_t>(
      std::max_element(gains.begin(), gains.end()) - gains.begin());
  const double peak0 = gains[imax];
  if (!(peak0 > 0.0)) return failed("no positive gain peak");
  const double half = 0.5 * peak0;

  // Work in MHz relative to the peak sample for conditioning.
  const double ref = freqs_hz[imax];
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = (freqs_hz[i] - ref) * 1e-6;

  double left = NAN, right = NAN;
  for (std::size_t i = imax; i > 0; --i) {
    if (gains[i - 1] < half) {
      left = crossing(x[i - 1], gains[i - 1], x[i], gains[i], half);
      break;
    }
  }
  for (std::size_t i = imax; i + 1 < n; ++i) {
    if (gains[i + 1] < half) {
      right = crossing(x[i], gains[i], x[i + 1], gains[i + 1], half);
      break;
    }
  }
  double width0;
  if (std::isfinite(left) && std::isfinite(right)) width0 = right - left;
  else if (std::isfinite(left)) width0 = -2.0 * left;
  else if (std::isfinite(right)) width0 = 2.0 * right;
  else return failed("spectrum does not span the half-height width around the maximum");
  if (!(width0 > 0.0)) return failed("degenerate half-height width");
  double center0 = 0.0;
  if (std::isfinite(left) && std::isfinite(right)) center0 = 0.5 * (left + right);

  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < n; ++i)
    if (options.window_fwhm <= 0.0 || std::abs(x[i] - center0) <= options.window_fwhm * width0)
      use.push_back(i);
  if (use.size() < 7) return failed("fewer than 7 samples inside the fit window");

  Vec3 p{peak0, center0, width0};  // peak, center [MHz], fwhm [MHz]
  auto cost_of = [&](const Vec3& q) {
    double c = 0.0;
    for (std::size_t i : use) {
      const double r = gains[i] - lorentzian(x[i], q[0], q[1], q[2]);
      c += r * r;
    }
    return c;
  };
  double cost = cost_of(p);
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  for (it = 1; it <= options.max_iters; ++it) {
    Mat3 jtj{};
    Vec3 jtr{};
    for (std::size_t i : use) {
      const double q = 2.0 * (x[i] - p[1]) / p[2];
      const double d = 1.0 + q * q;
      const double model = p[0] / d;
      const Vec3 jac{1.0 / d, 4.0 * p[0] * q / (p[2] * d * d), 2.0 * p[0] * q * q / (p[2] * d * d)};
      const double r = gains[i] - model;
      for (int a = 0; a < 3; ++a) {
        jtr[a] += jac[a] * r;
        for (int b = 0; b < 3; ++b) jtj[a][b] += jac[a] * jac[b];
      }
    }
    bool stepped = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Mat3 damped = jtj;
      for (int a = 0; a < 3; ++a) damped[a][a] += lambda * std::max(jtj[a][a], 1e-300);
      Vec3 delta{};
      if (!solve3(damped, jtr, delta)) {
        lambda *= 10.0;
        continue;
      }
      Vec3 trial{p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]};
      if (!(trial[2] > 0.0) || !(trial[0] > 0.0)) {
        lambda *= 10.0;
        continue;
      }
      const double trial_cost = cost_of(trial);
      if (trial_cost <= cost) {
        const double rel = std::abs(delta[1]) / std::max(trial[2], 1e-12) +
                           std::abs(delta[2]) / trial[2] + std::abs(delta[0]) / trial[0];
        const double drop = cost - trial_cost;
        p = trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel < 1e-12 || drop <= 1e-15 * std::max(cost, 1e-300)) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      // No descent direction left: a minimum to working precision.
      converged = true;
      break;
    }
    if (converged) break;
  }

  LorentzianFit out;
  out.iterations = std::min(it, options.max_iters);
  out.peak_gain = p[0];
  out.bfs_hz = ref + p[1] * 1e6;
  out.fwhm_hz = p[2] * 1e6;
  out.residual_rms = std::sqrt(cost / static_cast<double>(use.size()));
  if (!converged) return failed("fit did not converge within the iteration limit");
  if (!std::isfinite(out.bfs_hz) || !std::isfinite(out.fwhm_hz))
    return failed("fit diverged");
  if (out.bfs_hz < freqs_hz.front() || out.bfs_hz > freqs_hz.back())
    return failed("fitted center left the swept range");
  out.ok = true;
  return out;
}

}  // namespace botda
