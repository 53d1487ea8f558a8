#include "botda/tv_deconv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "botda/errors.hpp"
#include "botda/parallel.hpp"

namespace botda {

namespace {

constexpr int kMaxRhoExponent = 24;
constexpr int kObjectiveStride = 8;

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// D' w for forward differences D (w has n - 1 entries).
void add_difference_adjoint(std::span<const double> w, double scale, std::span<double> out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    out[i] -= scale * w[i];
    out[i + 1] += scale * w[i];
  }
}

}  // namespace

void DeconvConfig::validate() const {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw DomainError("mu must be finite and >= 0");
  if (max_iters < 1) throw DomainError("max_iters must be >= 1");
  if (!(rel_tolerance > 0.0)) throw DomainError("rel_tolerance must be > 0");
  if (!(penalty_rho > 0.0)) throw DomainError("penalty_rho must be > 0");
}

double tv_norm(std::span<const double> f) {
  if (f.size() < 2) throw DomainError("tv_norm needs at least two samples");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) s += std::abs(f[i + 1] - f[i]);
  return s;
}

std::vector<double> apply_operator(const DeconvKernel& kernel, std::span<const double> f) {
  const auto n = static_cast<long>(f.size());
  std::vector<double> out(f.size(), 0.0);
  const auto first = static_cast<long>(kernel.first_nonzero());
  const auto last = static_cast<long>(kernel.last_nonzero());
  const long o = kernel.origin_index;
  for (long k = 0; k < n; ++k) {
    double acc = 0.0;
    // source index j = k - m + o must lie in [0, n)
    const long m_lo = std::max(first, k + o - (n - 1));
    const long m_hi = std::min(last, k + o);
    for (long m = m_lo; m <= m_hi; ++m) acc += kernel.samples[m] * f[k - m + o];
    out[k] = acc;
  }
  return out;
}

std::vector<double> apply_adjoint(const DeconvKernel& kernel, std::span<const double> g) {
  const auto n = static_cast<long>(g.size());
  std::vector<double> out(g.size(), 0.0);
  const auto first = static_cast<long>(kernel.first_nonzero());
  const auto last = static_cast<long>(kernel.last_nonzero());
  const long o = kernel.origin_index;
  for (long j = 0; j < n; ++j) {
    double acc = 0.0;
    // output index k = j + m - o must lie in [0, n)
    const long m_lo = std::max(first, o - j);
    const long m_hi = std::min(last, n - 1 - j + o);
    for (long m = m_lo; m <= m_hi; ++m) acc += kernel.samples[m] * g[j + m - o];
    out[j] = acc;
  }
  return out;
}

double tv_objective(const DeconvKernel& kernel, std::span<const double> f,
                    std::span<const double> g, double mu) {
  const auto n = static_cast<long>(f.size());
  const auto first = static_cast<long>(kernel.first_nonzero());
  const auto last = static_cast<long>(kernel.last_nonzero());
  const long o = kernel.origin_index;
  const double* taps = kernel.samples.data();
  double fidelity = 0.0;
  for (long k = 0; k < n; ++k) {
    double acc = 0.0;
    const long m_lo = std::max(first, k + o - (n - 1));
    const long m_hi = std::min(last, k + o);
    for (long m = m_lo; m <= m_hi; ++m) acc += taps[m] * f[k - m + o];
    fidelity += (acc - g[k]) * (acc - g[k]);
  }
  return fidelity + (mu > 0.0 ? mu * tv_norm(f) : 0.0);
}

BandedCholesky::BandedCholesky(std::vector<double> lower_band, std::size_t n,
                               std::size_t bandwidth)
    : l_(std::move(lower_band)), n_(n), b_(bandwidth) {
  const std::size_t w = b_ + 1;
  if (l_.size() != n_ * w) throw ContractError("band storage has the wrong size");
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t j0 = i > b_ ? i - b_ : 0;
    for (std::size_t j = j0; j <= i; ++j) {
      double s = l_[i * w + (i - j)];
      for (std::size_t k = j0; k < j; ++k) s -= l_[i * w + (i - k)] * l_[j * w + (j - k)];
      if (i == j) {
        if (!(s > 0.0)) throw DomainError("banded system is not positive definite");
        l_[i * w] = std::sqrt(s);
      } else {
        l_[i * w + (i - j)] = s / l_[j * w];
      }
    }
  }
  lt_.assign(n_ * w, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t d = 0; d <= b_ && i + d < n_; ++d) lt_[i * w + d] = l_[(i + d) * w + d];
}

void BandedCholesky::solve_in_place(std::span<double> x) const {
  // Both sweeps walk columns of L, stored contiguously in lt_.
  const std::size_t w = b_ + 1;
  double* xs = x.data();
  for (std::size_t j = 0; j < n_; ++j) {
    const double* col = &lt_[j * w];
    const double xj = xs[j] / col[0];
    xs[j] = xj;
    const std::size_t len = std::min(n_ - 1 - j, b_);
    double* tail = xs + j;
#pragma omp simd
    for (std::size_t d = 1; d <= len; ++d) tail[d] -= col[d] * xj;
  }
  for (std::size_t ii = n_; ii > 0; --ii) {
    const std::size_t i = ii - 1;
    const double* col = &lt_[i * w];
    const std::size_t len = std::min(n_ - 1 - i, b_);
    const double* tail = xs + i;
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (std::size_t d = 1; d <= len; ++d) s += col[d] * tail[d];
    xs[i] = (xs[i] - s) / col[0];
  }
}

TvDeconvolver::TvDeconvolver(DeconvKernel kernel, std::size_t n_samples, DeconvConfig config)
    : kernel_(std::move(kernel)), n_(n_samples), config_(config), shared_(std::make_shared<Shared>()) {
  config_.validate();
  if (n_ < 2) throw DomainError("deconvolution needs at least two samples");
  if (kernel_.samples.empty()) throw ContractError("empty kernel");
  if (kernel_.support_length() >= n_)
    throw DomainError("kernel support must be shorter than the trace");

  const auto first = static_cast<long>(kernel_.first_nonzero());
  const auto last = static_cast<long>(kernel_.last_nonzero());
  const long o = kernel_.origin_index;
  const auto n = static_cast<long>(n_);
  const std::size_t b = static_cast<std::size_t>(last - first);
  const std::size_t w = b + 1;
  shared_->bandwidth = b;
  shared_->hth_band.assign(n_ * w, 0.0);
  // (H'H)(j + d, j) = sum_m K[m] K[m - d] over rows k = j + m - o inside the trace.
  for (long j = 0; j < n; ++j) {
    for (long d = 0; d <= static_cast<long>(b) && j + d < n; ++d) {
      double acc = 0.0;
      for (long m = first + d; m <= last; ++m) {
        const long k = j + m - o;
        if (k < 0 || k >= n) continue;
        acc += kernel_.samples[m] * kernel_.samples[m - d];
      }
      shared_->hth_band[static_cast<std::size_t>(j + d) * w + static_cast<std::size_t>(d)] = acc;
    }
  }
}

TvDeconvolver TvDeconvolver::with_mu(double mu) const {
  TvDeconvolver copy = *this;
  copy.config_.mu = mu;
  copy.config_.validate();
  return copy;
}

double TvDeconvolver::rho_for(int rho_exponent) const {
  return std::ldexp(config_.penalty_rho, rho_exponent);
}

std::shared_ptr<const BandedCholesky> TvDeconvolver::factor_for(int rho_exponent) const {
  {
    std::lock_guard lock(shared_->mutex);
    auto it = shared_->factors.find(rho_exponent);
    if (it != shared_->factors.end()) return it->second;
  }
  const double rho = rho_for(rho_exponent);
  const std::size_t b = std::max<std::size_t>(shared_->bandwidth, 1);
  const std::size_t w = b + 1;
  const std::size_t src_w = shared_->bandwidth + 1;
  std::vector<double> band(n_ * w, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t d = 0; d < src_w; ++d) band[i * w + d] = 2.0 * shared_->hth_band[i * src_w + d];
  // rho D'D: diagonal 1 at the ends and 2 inside, off-diagonal -1.
  for (std::size_t i = 0; i < n_; ++i) {
    band[i * w] += rho * ((i == 0 || i + 1 == n_) ? 1.0 : 2.0);
    if (i > 0) band[i * w + 1] -= rho;
  }
  auto factor = std::make_shared<const BandedCholesky>(std::move(band), n_, b);
  std::lock_guard lock(shared_->mutex);
  return shared_->factors.emplace(rho_exponent, std::move(factor)).first->second;
}

RecoveredProfile TvDeconvolver::solve(std::span<const double> g, AdmmState* warm) const {
  if (g.size() != n_) throw ContractError("trace length does not match the solver size");
  const double mu = config_.mu;
  const std::size_t m = n_ - 1;

  std::vector<double> htg = apply_adjoint(kernel_, g);
  for (double& v : htg) v *= 2.0;

  std::vector<double> f(n_), z(m), u(m, 0.0);
  int rho_exp = 0;
  if (warm && warm->f.size() == n_ && warm->z.size() == m && warm->u.size() == m) {
    f = warm->f;
    z = warm->z;
    u = warm->u;
    rho_exp = warm->rho_exponent;
  } else {
    std::copy(g.begin(), g.end(), f.begin());
    for (std::size_t i = 0; i < m; ++i) z[i] = f[i + 1] - f[i];
  }

  auto objective = [&](std::span<const double> x) { return tv_objective(kernel_, x, g, mu); };

  RecoveredProfile out;
  std::vector<double> best = f;
  double best_obj = objective(f);
  std::vector<double> f_prev(n_), rhs(n_), df(m), z_prev(m), u_prev(m), dual(n_), tmp(m);
  // Extrapolated copies used by the f-update when acceleration is on.
  std::vector<double> z_hat = z, u_hat = u;
  double momentum = 1.0;
  double combined_prev = std::numeric_limits<double>::infinity();
  int adaptations = 0;
  bool converged = false;
  double rel_change = 0.0;
  int iter = 0;
  auto factor = factor_for(rho_exp);

  for (iter = 1; iter <= config_.max_iters; ++iter) {
    const double rho = rho_for(rho_exp);
    f_prev = f;
    // f-update: (2H'H + rho D'D) f = 2H'g + rho D'(z - u)
    rhs = htg;
    for (std::size_t i = 0; i < m; ++i) tmp[i] = z_hat[i] - u_hat[i];
    add_difference_adjoint(tmp, rho, rhs);
    factor->solve_in_place(rhs);
    f.swap(rhs);
    if (config_.nonneg)
      for (double& v : f) v = std::max(v, 0.0);

    // z-update (shrinkage) and scaled dual ascent
    z_prev = z;
    u_prev = u;
    const double threshold = mu / rho;
    for (std::size_t i = 0; i < m; ++i) {
      df[i] = f[i + 1] - f[i];
      z[i] = soft_threshold(df[i] + u_hat[i], threshold);
      u[i] = u_hat[i] + df[i] - z[i];
    }

    double primal = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < m; ++i) primal += (df[i] - z[i]) * (df[i] - z[i]);
    primal = std::sqrt(primal);
    std::fill(dual.begin(), dual.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = z[i] - z_hat[i];
    add_difference_adjoint(tmp, rho, dual);
    const double dual_res = norm2(dual);
    for (std::size_t i = 0; i < n_; ++i) diff += (f[i] - f_prev[i]) * (f[i] - f_prev[i]);
    const double f_norm = std::max(norm2(f), 1e-300);
    rel_change = std::sqrt(diff) / f_norm;

    const bool stop = rel_change <= config_.rel_tolerance && primal <= config_.rel_tolerance * f_norm;
    // The objective costs a convolution, so it is sampled unless recorded.
    if (config_.record_objective || stop || iter % kObjectiveStride == 0 || iter == config_.max_iters) {
      const double obj = objective(f);
      if (obj <= best_obj) {
        best_obj = obj;
        best = f;
      }
    }
    if (config_.record_objective) out.objective_history.push_back(best_obj);
    if (stop) {
      converged = true;
      break;
    }

    int step = 0;
    if (config_.adapt_rho && adaptations < 64 && iter < config_.max_iters / 2) {
      if (primal > 10.0 * dual_res && rho_exp < kMaxRhoExponent) step = 1;
      else if (dual_res > 10.0 * primal && rho_exp > -kMaxRhoExponent) step = -1;
    }
    if (step != 0) {
      rho_exp += step;
      const double scale = step > 0 ? 0.5 : 2.0;
      for (double& v : u) v *= scale;
      factor = factor_for(rho_exp);
      ++adaptations;
      // a new penalty invalidates the momentum history
      z_hat = z;
      u_hat = u;
      momentum = 1.0;
      combined_prev = std::numeric_limits<double>::infinity();
      continue;
    }

    if (!config_.accelerate) {
      z_hat = z;
      u_hat = u;
      continue;
    }
    // Nesterov extrapolation of (z, u) with restart when the combined
    // residual stops shrinking.
    double combined = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      combined += (u[i] - u_hat[i]) * (u[i] - u_hat[i]) + (z[i] - z_hat[i]) * (z[i] - z_hat[i]);
    combined *= rho;
    if (combined < 0.999 * combined_prev) {
      const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      const double beta = (momentum - 1.0) / next;
      for (std::size_t i = 0; i < m; ++i) {
        z_hat[i] = z[i] + beta * (z[i] - z_prev[i]);
        u_hat[i] = u[i] + beta * (u[i] - u_prev[i]);
      }
      momentum = next;
      combined_prev = combined;
    } else {
      momentum = 1.0;
      z_hat = z;
      u_hat = u;
      combined_prev = combined / 0.999;
    }
  }

  if (warm) {
    warm->f = f;
    warm->z = z;
    warm->u = u;
    warm->rho_exponent = rho_exp;
  }
  out.samples = std::move(best);
  out.diagnostics.iterations = std::min(iter, config_.max_iters);
  out.diagnostics.final_objective = best_obj;
  out.diagnostics.final_relative_change = rel_change;
  out.diagnostics.mu = mu;
  out.diagnostics.penalty_rho = rho_for(rho_exp);
  out.diagnostics.converged = converged;
  return out;
}

SamplingGrid recovered_grid(const SamplingGrid& grid, const DeconvKernel& kernel) {
  SamplingGrid out = grid;
  out.t0_s += kernel.position_offset_samples() * grid.dt_s;
  return out;
}

RecoveredProfile tv_deconvolve(const GainTrace& g, const DeconvKernel& kernel,
                               const DeconvConfig& cfg) {
  g.validate();
  if (std::abs(kernel.dt_s - g.grid.dt_s) > 1e-9 * g.grid.dt_s)
    throw ContractError("kernel and trace sample intervals differ");
  TvDeconvolver solver(kernel, g.samples.size(), cfg);
  RecoveredProfile out = solver.solve(g.samples);
  out.grid = recovered_grid(g.grid, kernel);
  return out;
}

bool RecoveredMap::all_converged() const {
  return std::all_of(diagnostics.begin(), diagnostics.end(),
                     [](const DeconvDiagnostics& d) { return d.converged; });
}

RecoveredMap tv_deconvolve(const BgsMap& map, const DeconvKernel& kernel, const DeconvConfig& cfg) {
  map.validate();
  if (!(map.meta().pulse == kernel.source.pulse))
    throw ContractError("kernel was built for a different pulse scheme than the map");
  if (map.meta().recovered) throw ContractError("map has already been deconvolved");
  if (std::abs(kernel.dt_s - map.grid().dt_s) > 1e-9 * map.grid().dt_s)
    throw ContractError("kernel and map sample intervals differ");

  const TvDeconvolver solver(kernel, map.n_samples(), cfg);
  RecoveredMap out;
  out.map.sweep = map.sweep;
  out.map.traces.resize(map.n_freqs());
  out.diagnostics.resize(map.n_freqs());
  const SamplingGrid grid = recovered_grid(map.grid(), kernel);
  parallel_for(map.n_freqs(), [&](std::size_t i) {
    RecoveredProfile r = solver.solve(map.traces[i].samples);
    GainTrace t = map.traces[i];
    t.samples = std::move(r.samples);
    t.grid = grid;
    t.meta.recovered = true;
    out.map.traces[i] = std::move(t);
    out.diagnostics[i] = r.diagnostics;
  });
  return out;
}

}  // namespace botda
