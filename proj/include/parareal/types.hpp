#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace parareal {

using StateVec = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid user input: unknown names, inconsistent grids, bad parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Shape mismatch between trajectories, sample lists or vectors.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures raised while integrating.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton iteration on implicit stage equations did not converge.
class StepFailure : public NumericalError {
 public:
  StepFailure(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A propagated state became non-finite.
class BlowUp : public NumericalError {
 public:
  BlowUp(const std::string& what, std::size_t step, std::ptrdiff_t chunk = -1)
      : NumericalError(what), step_(step), chunk_(chunk) {}
  std::size_t step() const noexcept { return step_; }
  /// Chunk index the failure belongs to, or -1 when not tagged.
  std::ptrdiff_t chunk() const noexcept { return chunk_; }

 private:
  std::size_t step_;
  std::ptrdiff_t chunk_;
};

/// A diagnostic could not be computed from the supplied data.
class DiagnosticUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const StateVec& v) { return v.allFinite(); }

}  // namespace parareal
