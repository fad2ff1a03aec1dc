#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace crpred {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Sample-space point. Continuous models use real coordinates, counting
// models store integer-valued reals.
using Observation = Eigen::VectorXd;

// Error taxonomy shared by the whole library. The C API maps these onto
// status codes; everything else propagates as crpred::Error.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Parameter outside the model domain, or observation outside the support.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested operation is not supported by the model (missing sampler,
// quadrature in too many dimensions, ...).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be inverted is numerically singular.
class SingularError : public Error {
 public:
  SingularError(const std::string& what, double condition)
      : Error(what), condition_number(condition) {}
  double condition_number;
};

// Non-finite integrand value on a positive-mass region.
class IntegrandError : public Error {
 public:
  using Error::Error;
};

// Discrete support truncation failed to capture the required mass.
class CoverageError : public Error {
 public:
  using Error::Error;
};

// Likelihood ratio is +inf on a set of positive mass: P_theta is not
// absolutely continuous w.r.t. the reference parameter.
class AbsContinuityError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration or violated operation precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Generic numerical evaluation failure (non-finite density, failed
// finite difference, non-convergent refinement).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Condition-number limit above which symmetric inverses are refused.
inline constexpr double kConditionLimit = 1e12;

// Symmetrize in place: (M + M') / 2.
inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  return es.eigenvalues().minCoeff();
}

// Inverse of a symmetric positive (semi)definite matrix via
// eigendecomposition. Throws SingularError when the condition number
// reaches `cond_limit`; no silent pseudo-inverse.
Matrix symmetric_inverse(const Matrix& m, double cond_limit = kConditionLimit);

// Condition number (|lambda|_max / |lambda|_min) of a symmetric matrix.
double symmetric_condition(const Matrix& m);

}  // namespace crpred
