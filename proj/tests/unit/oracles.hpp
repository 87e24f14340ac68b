#pragma once

// Reference implementations used as independent oracles by the tests. They
// are written for clarity, not speed, and avoid the library's factorization
// and block-layout code paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rlgps/kernel.hpp"
#include "rlgps/types.hpp"

namespace oracle {

using rlgps::Index;
using rlgps::Matrix;
using rlgps::Vector;

/// Correlation written out from the closed forms, one branch per family.
inline double correlation(rlgps::KernelFamily f, double r, double ell) {
  const double u = r / ell;
  switch (f) {
    case rlgps::KernelFamily::Rbf:
      return std::exp(-0.5 * r * r / (ell * ell));
    case rlgps::KernelFamily::Matern15:
      return (1.0 + std::sqrt(3.0) * u) * std::exp(-std::sqrt(3.0) * u);
    case rlgps::KernelFamily::Matern25:
      return (1.0 + std::sqrt(5.0) * u + 5.0 * u * u / 3.0) * std::exp(-std::sqrt(5.0) * u);
  }
  return 0.0;
}

/// Scalar kernel value via explicit loops over coordinates.
inline double base_kernel(const rlgps::ScalarKernelSpec& spec, const Vector& a, const Vector& b) {
  double r2 = 0.0;
  for (Index k = 0; k < a.size(); ++k) r2 += (a(k) - b(k)) * (a(k) - b(k));
  return spec.variance * correlation(spec.family, std::sqrt(r2), spec.lengthscale);
}

/// A = alpha alpha^T with explicit sums.
inline Matrix coregionalization(const Matrix& alpha) {
  Matrix A(alpha.rows(), alpha.rows());
  for (Index r = 0; r < alpha.rows(); ++r)
    for (Index s = 0; s < alpha.rows(); ++s) {
      double acc = 0.0;
      for (Index l = 0; l < alpha.cols(); ++l) acc += alpha(r, l) * alpha(s, l);
      A(r, s) = acc;
    }
  return A;
}

/// Dense stacked kernel matrix between two point sets, output-fastest.
inline Matrix dense_kernel(const rlgps::ScalarKernelSpec& spec, const Matrix& A, const Matrix& X, const Matrix& Y) {
  const Index d = A.rows();
  Matrix K(X.rows() * d, Y.rows() * d);
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < Y.rows(); ++j) {
      const double k = base_kernel(spec, X.row(i).transpose(), Y.row(j).transpose());
      for (Index r = 0; r < d; ++r)
        for (Index s = 0; s < d; ++s) K(i * d + r, j * d + s) = A(r, s) * k;
    }
  return K;
}

/// Posterior mean and covariance by direct dense solves (full-pivot LU).
struct DensePosterior {
  Vector mean;
  Matrix cov;
};

inline DensePosterior dense_posterior(const rlgps::ScalarKernelSpec& spec, const Matrix& A, double noise,
                                      const Matrix& X, const Vector& y, const Matrix& Z) {
  const Matrix Kxx = dense_kernel(spec, A, X, X) + noise * noise * Matrix::Identity(X.rows() * A.rows(), X.rows() * A.rows());
  const Matrix Kxz = dense_kernel(spec, A, X, Z);
  const Matrix Kzz = dense_kernel(spec, A, Z, Z);
  const Eigen::FullPivLU<Matrix> lu(Kxx);
  return {Kxz.transpose() * lu.solve(y), Kzz - Kxz.transpose() * lu.solve(Kxz)};
}

/// 1/2 log det(I + K / noise^2) via a full-pivot LU determinant.
inline double dense_info_gain(const rlgps::ScalarKernelSpec& spec, const Matrix& A, double noise, const Matrix& X) {
  const Index n = X.rows() * A.rows();
  const Matrix M = Matrix::Identity(n, n) + dense_kernel(spec, A, X, X) / (noise * noise);
  const Eigen::FullPivLU<Matrix> lu(M);
  double logdet = 0.0;
  for (Index i = 0; i < n; ++i) logdet += std::log(std::abs(lu.matrixLU()(i, i)));
  return 0.5 * logdet;
}

/// Exhaustive best total reward over all action sequences from `s`.
inline double enumerate_best(const Matrix& reward, const rlgps::IndexMatrix& next, Index s, Index steps) {
  if (steps == 0) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (Index a = 0; a < reward.cols(); ++a) {
    best = std::max(best, reward(s, a) + enumerate_best(reward, next, next(s, a), steps - 1));
  }
  return best;
}

inline Matrix uniform(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline Matrix normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

}  // namespace oracle
