#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "rlgps/types.hpp"

namespace rlgps {

enum class KernelFamily { Rbf, Matern15, Matern25 };

KernelFamily parse_kernel_family(std::string_view name);
std::string_view to_string(KernelFamily family);

/// Stationary scalar kernel k(z, z') = variance * rho(|z - z'| / lengthscale).
struct ScalarKernelSpec {
  KernelFamily family = KernelFamily::Matern25;
  double lengthscale = 0.2;
  double variance = 1.0;

  /// Throws ConfigError on non-positive hyperparameters.
  void validate() const;
};

/// Correlation function of `family` at scaled distance u = r / lengthscale.
template <typename Scalar>
Scalar correlation(KernelFamily family, Scalar u) {
  using std::exp;
  using std::sqrt;
  switch (family) {
    case KernelFamily::Rbf:
      return exp(-u * u / Scalar(2));
    case KernelFamily::Matern15: {
      const Scalar a = sqrt(Scalar(3)) * u;
      return (Scalar(1) + a) * exp(-a);
    }
    case KernelFamily::Matern25: {
      const Scalar a = sqrt(Scalar(5)) * u;
      return (Scalar(1) + a + a * a / Scalar(3)) * exp(-a);
    }
  }
  return Scalar(0);
}

namespace detail {

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar eval_unchecked(const ScalarKernelSpec& spec,
                                         const Eigen::MatrixBase<DerivedA>& z,
                                         const Eigen::MatrixBase<DerivedB>& zp) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar r = (z - zp).norm();
  return Scalar(spec.variance) * correlation<Scalar>(spec.family, r / Scalar(spec.lengthscale));
}

}  // namespace detail

/// k(z, z') for a single pair of points.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar scalar_eval(const ScalarKernelSpec& spec,
                                      const Eigen::MatrixBase<DerivedA>& z,
                                      const Eigen::MatrixBase<DerivedB>& zp) {
  spec.validate();
  if (z.size() != zp.size()) {
    throw InputError("scalar_eval: point dimensions differ (" + std::to_string(z.size()) + " vs " +
                     std::to_string(zp.size()) + ")");
  }
  return detail::eval_unchecked(spec, z, zp);
}

/// Mixing weights alpha (d x L) of a linear model of coregionalization and the
/// induced output covariance A = alpha * alpha^T.
class MixingMatrix {
 public:
  MixingMatrix() = default;
  explicit MixingMatrix(Matrix weights);

  static MixingMatrix identity(Index outputs);
  /// Standard-normal weights, d x latents, reproducible from `seed`.
  static MixingMatrix random(Index outputs, Index latents, std::uint64_t seed);

  const Matrix& weights() const { return weights_; }
  const Matrix& coregionalization() const { return coreg_; }
  Index outputs() const { return weights_.rows(); }
  Index latents() const { return weights_.cols(); }

  /// Rescales rows so that max_i A_ii == `max_diagonal`.
  MixingMatrix scaled_to_max_diagonal(double max_diagonal) const;

 private:
  Matrix weights_;
  Matrix coreg_;
};

/// Fixed 3x3 mixing weights used by the GP-sampled environment suite.
Matrix default_mixing_weights();

enum class OutputStructure { Lmc, Independent };

/// Matrix-valued kernel k(z, z') = A * k_g(z, z').
struct LmcKernel {
  ScalarKernelSpec base;
  MixingMatrix mixing;
  OutputStructure structure = OutputStructure::Lmc;

  static LmcKernel lmc(ScalarKernelSpec base, MixingMatrix mixing);
  /// A = identity: the d outputs are independent GPs with the same base kernel.
  static LmcKernel independent(ScalarKernelSpec base, Index outputs);

  Index outputs() const { return mixing.outputs(); }
  const Matrix& coregionalization() const { return mixing.coregionalization(); }
};

/// n x m base-kernel Gram matrix between the rows of `x` and the rows of `y`.
Matrix base_cross(const ScalarKernelSpec& spec, const Matrix& x, const Matrix& y);
/// Symmetric n x n base-kernel Gram matrix over the rows of `points`.
Matrix base_gram(const ScalarKernelSpec& spec, const Matrix& points);

/// Expands a scalar Gram matrix into the output-fastest block layout:
/// out(i*d + r, j*d + s) = base(i, j) * coreg(r, s).
Matrix block_expand(const Matrix& base, const Matrix& coreg);

Matrix lmc_block(const LmcKernel& kern, const Vector& z, const Vector& zp);

/// nd x nd block kernel matrix over the rows of `points`.
Matrix kernel_matrix(const LmcKernel& kern, const Matrix& points);

/// nd x d cross-covariance between the training outputs and f(z).
Matrix cross_covariance(const LmcKernel& kern, const Matrix& train_points, const Vector& z);

}  // namespace rlgps
