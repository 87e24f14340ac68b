#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "rlgps/kernel.hpp"
#include "rlgps/types.hpp"

namespace rlgps {

/// One noisy vector observation y = f(z) + eps, eps ~ N(0, noise^2 I).
struct Observation {
  Vector input;
  Vector output;
};

/// Posterior mean and covariance of f(z).
struct Prediction {
  Vector mean;
  Matrix cov;
};

struct BatchUpdate;
class GpPosterior;

/// Exact multi-output GP posterior over stacked observations.
///
/// Outputs are stacked output-fastest: entry i*d + r is output r of point i.
/// The lower Cholesky factor of (K_n + noise^2 I) grows by block appends;
/// storage is over-allocated so that conditioning an rvalue posterior does
/// not copy the factor. A posterior is never mutated once returned: the
/// conditioning functions take their argument by value.
class GpPosterior {
 public:
  GpPosterior(LmcKernel kernel, double noise_std, Index input_dim);

  const LmcKernel& kernel() const { return kernel_; }
  double noise_std() const { return noise_; }
  Index input_dim() const { return input_dim_; }
  Index outputs() const { return kernel_.outputs(); }
  /// Number of conditioned input points n.
  Index size() const { return n_; }
  Index stacked_size() const { return n_ * outputs(); }

  auto inputs() const { return inputs_.topRows(n_); }
  auto stacked_outputs() const { return y_.head(stacked_size()); }
  const auto cholesky() const {
    return factor_.topLeftCorner(stacked_size(), stacked_size()).template triangularView<Eigen::Lower>();
  }
  /// Dense lower-triangular copy of the factor.
  Matrix cholesky_factor() const;
  /// (K_n + noise^2 I)^{-1} y.
  auto weights() const { return weights_.head(stacked_size()); }
  /// 1/2 log det(I + K_n / noise^2) in nats.
  double info_gain() const { return info_gain_; }

  /// (K_n + noise^2 I)^{-1} rhs.
  Matrix solve(const Matrix& rhs) const;

  /// Pre-allocates storage for `points` conditioned inputs.
  void reserve(Index points);

  friend BatchUpdate condition_tracked(GpPosterior post, std::span<const Observation> batch);

 private:
  void ensure_capacity(Index points);

  LmcKernel kernel_;
  double noise_;
  Index input_dim_;
  Index n_ = 0;
  Matrix inputs_;   // capacity x input_dim
  Vector y_;        // capacity * d
  Matrix factor_;   // (capacity * d)^2, lower part valid
  Vector weights_;  // capacity * d
  double info_gain_ = 0.0;
};

/// Result of one batched update. `prior_cov` holds the noiseless predictive
/// covariance of f at the batch inputs under the posterior before the update,
/// stacked output-fastest ((b*d) x (b*d)).
struct BatchUpdate {
  GpPosterior posterior;
  Matrix prior_cov;

  /// b x d matrix of predictive variances at the batch inputs (pre-update).
  Matrix marginal_variances() const;
};

BatchUpdate condition_tracked(GpPosterior post, std::span<const Observation> batch);
/// Conditions on `batch` in one block append. Pass an rvalue to reuse storage.
GpPosterior condition(GpPosterior post, std::span<const Observation> batch);

Prediction predict(const GpPosterior& post, const Vector& z);
/// Joint prediction for all rows of `points`. Returns the stacked mean
/// (m*d) and stacked covariance ((m*d) x (m*d)).
Prediction predict_joint(const GpPosterior& post, const Matrix& points);
/// m x d matrix of clamped predictive variances at the rows of `points`.
Matrix marginal_variances(const GpPosterior& post, const Matrix& points);
Vector marginal_std(const GpPosterior& post, const Vector& z);
double info_gain(const GpPosterior& post);

/// Parameters of the Gaussian confidence multiplier and value-smoothness bounds.
struct ConfidenceConfig {
  double delta = 0.1;
  double beta_scale = 1.0;
  double grad_bound = 1.0;  // u_G
  double hess_bound = 1.0;  // u_H

  void validate() const;
};

/// beta_scale * sqrt(2 log(max(n, 2) / delta_eff)).
double beta(const ConfidenceConfig& cfg, Index n, double delta_eff);

enum class SamplingMode { Exact, Nystrom };

struct SamplingSpec {
  SamplingMode mode = SamplingMode::Exact;
  Index inducing = 100;
};

/// Hard limit on m*d for exact joint sampling.
inline constexpr Index kExactSamplingCapacity = 5000;

/// One posterior draw evaluated on every grid cell. Column 0 is the reward,
/// columns 1.. the transition coordinates (clamped into [0, 1]).
struct SampledModel {
  Matrix values;
  Index episode = 0;
  std::uint64_t seed = 0;

  auto reward() const { return values.col(0); }
  auto transitions() const { return values.rightCols(values.cols() - 1); }
};

/// Draws posterior function samples on a fixed set of grid cells.
///
/// Exact mode draws one joint prior sample over the grid (plus any training
/// inputs not on the grid) and corrects it with the conditioned data
/// (pathwise conditioning); the result has exactly the joint posterior law.
/// The base-kernel factor of the grid is computed once per sampler.
class GridSampler {
 public:
  GridSampler(LmcKernel kernel, Matrix grid);

  const Matrix& grid() const { return grid_; }
  Index size() const { return grid_.rows(); }

  Matrix sample_values(const GpPosterior& post, const SamplingSpec& spec, Rng& rng) const;
  SampledModel sample(const GpPosterior& post, const SamplingSpec& spec, Rng& rng) const;

 private:
  Matrix sample_exact(const GpPosterior& post, Rng& rng) const;
  Matrix sample_nystrom(const GpPosterior& post, Index inducing, Rng& rng) const;
  /// Grid row of each training input, or -1 when it is not a grid cell.
  std::vector<Index> locate(const Matrix& points) const;

  LmcKernel kernel_;
  Matrix grid_;
  Matrix gram_;
  Matrix factor_;
  std::map<std::vector<double>, Index> cell_index_;
};

SampledModel sample_on_grid(const GpPosterior& post, const Matrix& grid, const SamplingSpec& spec, Rng& rng);

/// Lower factor F with F F^T = m + jitter I, escalating the jitter from
/// 1e-10 * scale until the factorization succeeds.
Matrix jittered_cholesky(const Matrix& m);

/// In-place Cholesky on the lower triangle. Returns -1 on success or the
/// local index of the first non-positive pivot.
Index cholesky_in_place(Eigen::Ref<Matrix> m);

/// Versioned little-endian binary snapshot (debugging aid).
void write_snapshot(std::ostream& out, const GpPosterior& post);
struct Snapshot {
  Index points = 0;
  Index outputs = 0;
  double noise_std = 0.0;
  Matrix inputs;
  Vector stacked_outputs;
};
Snapshot read_snapshot(std::istream& in);

}  // namespace rlgps
