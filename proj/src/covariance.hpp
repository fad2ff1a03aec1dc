#pragma once

#include "common.hpp"

#include <cstdint>
#include <vector>

namespace crpred {

// Finite joint law of a pair (T, S) with T in R^k and S in R^d. Serves as
// the brute-force layer behind the covariance matrix inequality
//   E T T' >= E(TS') (E SS')^{-1} E(ST').
struct DiscreteJoint {
  std::vector<Vector> t;
  std::vector<Vector> s;
  std::vector<double> prob;

  int k() const { return t.empty() ? 0 : static_cast<int>(t.front().size()); }
  int d() const { return s.empty() ? 0 : static_cast<int>(s.front().size()); }
  std::size_t size() const { return prob.size(); }

  void validate() const;

  Matrix second_moment_s() const;  // E S S'
  Matrix second_moment_t() const;  // E T T'
  Matrix cross_moment() const;     // E T S'
};

struct CovarianceReport {
  Matrix lhs;       // E T T'
  Matrix rhs;       // E(TS') (E SS')^{-1} E(ST')
  Matrix residual;  // lhs - rhs, PSD up to numerics
  double min_eigenvalue = 0.0;
  // E ||Z||^2 with Z = T - E(TS')(E SS')^{-1} S; equals trace(residual).
  double equality_residual = 0.0;
  double s_condition = 0.0;
};

CovarianceReport covariance_bound(const DiscreteJoint& joint,
                                  double cond_limit = kConditionLimit);

// Values of the orthogonal projection P_S(U) = E(US')(E SS')^{-1} S at every
// outcome; u lists U's value per support point.
std::vector<double> project_onto_scores(const DiscreteJoint& joint,
                                        const std::vector<double>& u,
                                        double cond_limit = kConditionLimit);

// Equality case of the covariance inequality: E||Z||^2 <= tol.
bool equality_condition_holds(const DiscreteJoint& joint, double tol);

// Reproducible random joint for the property suites: support points uniform
// in [-2, 2], probabilities from a flat simplex draw, instances with an
// ill-conditioned E SS' redrawn.
DiscreteJoint random_joint(std::uint64_t seed, int max_k = 3, int max_d = 3,
                           int max_points = 8, double cond_limit = 1e4);

}  // namespace crpred
