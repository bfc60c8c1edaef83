#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hilqr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Malformed system, solver, or experiment description.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Base class for runtime numerical failures.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Guard crossing with near-zero normal rate; the transition map has no
/// valid first-order expansion there.
struct TangentialCrossing : NumericalError {
  using NumericalError::NumericalError;
};

/// Too many transition events inside a single timestep.
struct ZenoCap : NumericalError {
  using NumericalError::NumericalError;
};

/// Adaptive integration demanded a step below the configured minimum.
struct StepUnderflow : NumericalError {
  using NumericalError::NumericalError;
};

/// Event localization called without a sign change on the bracket.
struct NoBracket : NumericalError {
  using NumericalError::NumericalError;
};

/// Constraint block system is rank deficient.
struct SingularConstraint : NumericalError {
  using NumericalError::NumericalError;
};

/// Regularized input Hessian failed to be positive definite.
struct NonPDHessian : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace hilqr
