#include "model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace crpred {

namespace {

std::string format_theta(const Vector& theta) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (i) os << ", ";
    os << theta[i];
  }
  os << ")";
  return os.str();
}

}  // namespace

void DominatedModel::require_theta(const Vector& theta) const {
  if (!domain.holds(theta)) {
    throw DomainError("model '" + name + "': parameter " + format_theta(theta) +
                      " outside the open domain");
  }
}

double log_density(const DominatedModel& model, const Observation& x,
                   const Vector& theta) {
  model.require_theta(theta);
  double v = model.log_density(x, theta);
  if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
    throw EvaluationError("model '" + model.name +
                          "': non-finite log-density at theta=" + format_theta(theta));
  }
  return v;
}

double density(const DominatedModel& model, const Observation& x, const Vector& theta) {
  double lv = log_density(model, x, theta);
  if (lv == -std::numeric_limits<double>::infinity()) return 0.0;
  return std::exp(lv);  // underflow clamps to 0
}

double likelihood_ratio(const DominatedModel& model, const Vector& theta0,
                        const Vector& theta, const Observation& x) {
  double l0 = log_density(model, x, theta0);
  double l1 = log_density(model, x, theta);
  const double ninf = -std::numeric_limits<double>::infinity();
  if (l0 == ninf && l1 == ninf) return 1.0;
  if (l0 == ninf) return std::numeric_limits<double>::infinity();
  if (l1 == ninf) return 0.0;
  return std::exp(l1 - l0);
}

SampleBatch sample(const DominatedModel& model, const Vector& theta, long long n,
                   std::uint64_t seed) {
  model.require_theta(theta);
  if (n < 1) throw ConfigError("sample: count must be >= 1");
  if (!model.sampler) {
    throw CapabilityError("model '" + model.name + "' has no sampler");
  }
  SampleBatch batch;
  batch.observations = model.sampler(theta, n, seed);
  batch.theta = theta;
  batch.seed = seed;
  if (batch.observations.size() != static_cast<std::size_t>(n)) {
    throw EvaluationError("model '" + model.name + "': sampler returned wrong count");
  }
  return batch;
}

Matrix symmetric_inverse(const Matrix& m, double cond_limit) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  const Vector& ev = es.eigenvalues();
  double amax = ev.cwiseAbs().maxCoeff();
  double amin = ev.cwiseAbs().minCoeff();
  double cond = (amin == 0.0) ? std::numeric_limits<double>::infinity() : amax / amin;
  if (!(cond < cond_limit)) {
    throw SingularError("symmetric inverse: matrix singular (condition number " +
                            std::to_string(cond) + ")",
                        cond);
  }
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

double symmetric_condition(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  const Vector& ev = es.eigenvalues();
  double amax = ev.cwiseAbs().maxCoeff();
  double amin = ev.cwiseAbs().minCoeff();
  if (amin == 0.0) return std::numeric_limits<double>::infinity();
  return amax / amin;
}

}  // namespace crpred
