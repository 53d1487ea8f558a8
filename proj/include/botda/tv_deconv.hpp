#pragma once

// Total-variation regularized deconvolution
//
//     f = argmin ||H f - g||^2 + mu * sum_i |f[i+1] - f[i]|
//
// solved by ADMM on the split z = D f (D = forward differences). The f-update
// is a banded SPD solve with (2 H'H + rho D'D); the z-update is a closed-form
// soft threshold. rho follows residual balancing over powers of two so each
// distinct system matrix is factored once and shared across channels.

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "botda/dpp.hpp"
#include "botda/trace.hpp"

namespace botda {

struct DeconvConfig {
  double mu = 1e-3;
  int max_iters = 500;
  double rel_tolerance = 1e-6;
  double penalty_rho = 2.0;
  bool adapt_rho = true;
  /// Nesterov extrapolation of the splitting variables, restarted whenever
  /// the combined residual grows.
  bool accelerate = true;
  /// Project f onto f >= 0 after each f-update.
  bool nonneg = false;
  /// Keep the per-iteration objective of the returned (best-so-far) iterate.
  bool record_objective = false;

  void validate() const;
  bool operator==(const DeconvConfig&) const = default;
};

struct DeconvDiagnostics {
  int iterations = 0;
  double final_objective = 0.0;
  double final_relative_change = 0.0;
  double mu = 0.0;
  double penalty_rho = 0.0;
  bool converged = false;
};

struct RecoveredProfile {
  std::vector<double> samples;
  SamplingGrid grid;
  DeconvDiagnostics diagnostics;
  /// Objective of the best iterate after each outer iteration (non-increasing).
  std::vector<double> objective_history;
};

/// ADMM variables, reusable as a warm start for a nearby problem.
struct AdmmState {
  std::vector<double> f;
  std::vector<double> z;
  std::vector<double> u;
  int rho_exponent = 0;
};

/// sum |f[i+1] - f[i]|; DomainError for fewer than two samples.
double tv_norm(std::span<const double> f);

/// Zero-padded linear convolution, truncated to f.size() samples.
std::vector<double> apply_operator(const DeconvKernel& kernel, std::span<const double> f);

/// Adjoint of apply_operator for signals of length g.size().
std::vector<double> apply_adjoint(const DeconvKernel& kernel, std::span<const double> g);

/// ||H f - g||^2 + mu * tv_norm(f).
double tv_objective(const DeconvKernel& kernel, std::span<const double> f,
                    std::span<const double> g, double mu);

/// Lower-banded Cholesky factor of an SPD band matrix.
class BandedCholesky {
 public:
  /// `lower_band[i * (bandwidth + 1) + d]` holds A(i, i - d).
  BandedCholesky(std::vector<double> lower_band, std::size_t n, std::size_t bandwidth);
  void solve_in_place(std::span<double> x) const;
  std::size_t size() const { return n_; }

 private:
  std::vector<double> l_;
  std::vector<double> lt_;  // transposed copy for back substitution
  std::size_t n_;
  std::size_t b_;
};

/// Solver bound to one kernel and trace length; thread-safe for concurrent solves.
class TvDeconvolver {
 public:
  TvDeconvolver(DeconvKernel kernel, std::size_t n_samples, DeconvConfig config);

  RecoveredProfile solve(std::span<const double> g, AdmmState* warm = nullptr) const;

  const DeconvConfig& config() const { return config_; }
  const DeconvKernel& kernel() const { return kernel_; }
  std::size_t size() const { return n_; }
  /// Returns a solver with a different mu that shares the factor cache.
  TvDeconvolver with_mu(double mu) const;

 private:
  struct Shared {
    std::vector<double> hth_band;  // lower band of H'H
    std::size_t bandwidth = 0;
    std::mutex mutex;
    std::map<int, std::shared_ptr<const BandedCholesky>> factors;
  };
  std::shared_ptr<const BandedCholesky> factor_for(int rho_exponent) const;
  double rho_for(int rho_exponent) const;

  DeconvKernel kernel_;
  std::size_t n_;
  DeconvConfig config_;
  std::shared_ptr<Shared> shared_;
};

/// Single-trace deconvolution; the output grid is shifted by the kernel's
/// position offset so positions refer to the recovered fiber cells.
RecoveredProfile tv_deconvolve(const GainTrace& g, const DeconvKernel& kernel,
                               const DeconvConfig& cfg);

struct RecoveredMap {
  BgsMap map;
  std::vector<DeconvDiagnostics> diagnostics;

  bool all_converged() const;
};

/// Channel-by-channel deconvolution with one shared kernel. Throws
/// ContractError when the kernel was built for a different pulse scheme or grid.
RecoveredMap tv_deconvolve(const BgsMap& map, const DeconvKernel& kernel, const DeconvConfig& cfg);

/// Grid of a recovered profile for a trace on `grid`.
SamplingGrid recovered_grid(const SamplingGrid& grid, const DeconvKernel& kernel);

}  // namespace botda
