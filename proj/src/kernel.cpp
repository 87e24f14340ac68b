#include "rlgps/kernel.hpp"

#include <string>

namespace rlgps {

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "rbf") return KernelFamily::Rbf;
  if (name == "matern15") return KernelFamily::Matern15;
  if (name == "matern25") return KernelFamily::Matern25;
  throw ConfigError("unknown kernel family '" + std::string(name) +
                    "' (expected rbf, matern15 or matern25)");
}

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Rbf:
      return "rbf";
    case KernelFamily::Matern15:
      return "matern15";
    case KernelFamily::Matern25:
      return "matern25";
  }
  return "unknown";
}

void ScalarKernelSpec::validate() const {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw ConfigError("kernel lengthscale must be positive, got " + std::to_string(lengthscale));
  }
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw ConfigError("kernel variance must be positive, got " + std::to_string(variance));
  }
}

MixingMatrix::MixingMatrix(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows() == 0 || weights_.cols() == 0) {
    throw ConfigError("mixing matrix must be non-empty");
  }
  if (!weights_.allFinite()) throw ConfigError("mixing matrix has non-finite entries");
  coreg_ = weights_ * weights_.transpose();
}

MixingMatrix MixingMatrix::identity(Index outputs) {
  return MixingMatrix(Matrix::Identity(outputs, outputs));
}

MixingMatrix MixingMatrix::random(Index outputs, Index latents, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Matrix w(outputs, latents);
  for (Index i = 0; i < outputs; ++i)
    for (Index j = 0; j < latents; ++j) w(i, j) = normal(rng);
  return MixingMatrix(std::move(w));
}

MixingMatrix MixingMatrix::scaled_to_max_diagonal(double max_diagonal) const {
  const double current = coreg_.diagonal().maxCoeff();
  if (!(current > 0.0)) throw ConfigError("mixing matrix has zero output variance");
  return MixingMatrix(weights_ * std::sqrt(max_diagonal / current));
}

Matrix default_mixing_weights() {
  Matrix w(3, 3);
  w << 0.9926, 0.2082, 0.4968,   //
      -0.3196, 0.8869, 0.1603,   //
      0.1557, -1.4231, -1.3905;
  return w;
}

LmcKernel LmcKernel::lmc(ScalarKernelSpec base, MixingMatrix mixing) {
  base.validate();
  return LmcKernel{base, std::move(mixing), OutputStructure::Lmc};
}

LmcKernel LmcKernel::independent(ScalarKernelSpec base, Index outputs) {
  base.validate();
  return LmcKernel{base, MixingMatrix::identity(outputs), OutputStructure::Independent};
}

Matrix base_cross(const ScalarKernelSpec& spec, const Matrix& x, const Matrix& y) {
  spec.validate();
  if (x.rows() > 0 && y.rows() > 0 && x.cols() != y.cols()) {
    throw InputError("base_cross: point dimensions differ");
  }
  Matrix out(x.rows(), y.rows());
  for (Index j = 0; j < y.rows(); ++j)
    for (Index i = 0; i < x.rows(); ++i) out(i, j) = detail::eval_unchecked(spec, x.row(i), y.row(j));
  return out;
}

Matrix base_gram(const ScalarKernelSpec& spec, const Matrix& points) {
  spec.validate();
  const Index n = points.rows();
  Matrix out(n, n);
  for (Index j = 0; j < n; ++j) {
    out(j, j) = spec.variance;
    for (Index i = j + 1; i < n; ++i) {
      out(i, j) = detail::eval_unchecked(spec, points.row(i), points.row(j));
      out(j, i) = out(i, j);
    }
  }
  return out;
}

Matrix block_expand(const Matrix& base, const Matrix& coreg) {
  const Index d = coreg.rows();
  Matrix out(base.rows() * d, base.cols() * d);
  for (Index j = 0; j < base.cols(); ++j)
    for (Index i = 0; i < base.rows(); ++i) out.block(i * d, j * d, d, d) = base(i, j) * coreg;
  return out;
}

Matrix lmc_block(const LmcKernel& kern, const Vector& z, const Vector& zp) {
  return kern.coregionalization() * scalar_eval(kern.base, z, zp);
}

Matrix kernel_matrix(const LmcKernel& kern, const Matrix& points) {
  return block_expand(base_gram(kern.base, points), kern.coregionalization());
}

Matrix cross_covariance(const LmcKernel& kern, const Matrix& train_points, const Vector& z) {
  const Index d = kern.outputs();
  if (train_points.rows() == 0) return Matrix(0, d);
  if (train_points.cols() != z.size()) throw InputError("cross_covariance: point dimensions differ");
  return block_expand(base_cross(kern.base, train_points, z.transpose()), kern.coregionalization());
}

}  // namespace rlgps
