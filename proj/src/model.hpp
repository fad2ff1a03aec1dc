#pragma once

#include "common.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace crpred {

// Open connected parameter set Theta in R^d, described by a membership
// predicate. Membership must be deterministic.
struct ParameterDomain {
  int dim = 1;
  std::function<bool(const Vector&)> contains;

  bool holds(const Vector& theta) const {
    return theta.size() == dim && contains && contains(theta);
  }
};

enum class MeasureKind { Lebesgue, Counting };

struct DominatedModel;

// Declares that the model is an n-fold iid product of `base`. Used for the
// additivity shortcuts in Fisher/score-mean computations when the full
// observation space is too large for deterministic integration.
struct IidStructure {
  std::shared_ptr<const DominatedModel> base;
  int copies = 1;
};

// Parametric family dominated by a fixed measure (Lebesgue or counting).
// Immutable after construction; all members are pure functions.
struct DominatedModel {
  std::string name;
  ParameterDomain domain;
  MeasureKind measure = MeasureKind::Lebesgue;
  int obs_dim = 1;

  // log f_theta(x); -inf encodes zero density.
  std::function<double(const Observation&, const Vector&)> log_density;

  // Deterministic sampler keyed by (theta, count, seed); may be null.
  std::function<std::vector<Observation>(const Vector&, long long, std::uint64_t)>
      sampler;

  // Analytic score; when null the score falls back to central finite
  // differences of log_density.
  std::function<Vector(const Observation&, const Vector&)> analytic_score;

  // Lebesgue models: per-axis (location, scale) hints; the quadrature box
  // is location +/- 10 * scale.
  std::function<std::vector<std::pair<double, double>>(const Vector&)> quad_hint;

  // Counting models: support enumeration covering all but <= 1e-12 mass.
  std::function<std::vector<Observation>(const Vector&)> support;

  std::optional<IidStructure> iid;

  void require_theta(const Vector& theta) const;
};

struct SampleBatch {
  std::vector<Observation> observations;
  Vector theta;
  std::uint64_t seed = 0;
};

// f_theta(x) >= 0; exp of log_density with underflow clamped to 0.
double density(const DominatedModel& model, const Observation& x, const Vector& theta);

double log_density(const DominatedModel& model, const Observation& x,
                   const Vector& theta);

// Likelihood ratio of P_theta against P_theta0:
//   f_theta/f_theta0 on {f_theta0 > 0},
//   +inf on {f_theta0 = 0, f_theta > 0},
//   1 on {f_theta0 = 0, f_theta = 0}  (both laws put no mass there, any
//   finite value is valid; 1 keeps reciprocity degenerate-true).
double likelihood_ratio(const DominatedModel& model, const Vector& theta0,
                        const Vector& theta, const Observation& x);

// Deterministic sampling: identical (theta, n, seed) gives identical batches.
SampleBatch sample(const DominatedModel& model, const Vector& theta, long long n,
                   std::uint64_t seed);

}  // namespace crpred
