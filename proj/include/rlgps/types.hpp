#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rlgps {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using IndexMatrix = MatrixX<Index>;

/// Every random draw in the library goes through this engine so that a seed
/// fully determines a run.
using Rng = std::mt19937_64;

/// Base for all library errors. `exit_code()` is what the CLI returns.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

/// Malformed arguments: wrong dimensions, out-of-range indices.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A request that exceeds a hard size guard (e.g. exact joint sampling).
class CapacityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Parse failure in a text file; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Factorization breakdown. `pivot()` is the global row of the failed pivot.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, Index pivot)
      : Error(what + " (pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}
  Index pivot() const { return pivot_; }
  int exit_code() const override { return 3; }

 private:
  Index pivot_;
};

}  // namespace rlgps
