#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kronsc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A result would exceed a configured size or memory cap.
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration or specification.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Base for failures of a numerical procedure (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Nearest-Kronecker-product approximation failed; carries the last iterate.
class ApproximationError : public NumericalError {
 public:
  ApproximationError(const std::string& what, Eigen::VectorXd iterate)
      : NumericalError(what), iterate_(std::move(iterate)) {}

  const Eigen::VectorXd& iterate() const { return iterate_; }

 private:
  Eigen::VectorXd iterate_;
};

/// Unregularized ridge system with a singular Gram matrix.
class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Fixed factors collapsed to zero; the solver must be restarted.
class ReinitializationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Objective became non-finite.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Eigen/SVD routine did not converge.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed input file. `offset` is the byte position of the problem.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Data that cannot be processed, e.g. zero columns during normalization.
class DegenerateDataError : public Error {
 public:
  DegenerateDataError(const std::string& what, std::vector<std::size_t> indices)
      : Error(what), indices_(std::move(indices)) {}

  const std::vector<std::size_t>& indices() const { return indices_; }

 private:
  std::vector<std::size_t> indices_;
};

/// Labels outside the inferred cluster domain, or mismatched label lists.
class LabelDomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace kronsc
