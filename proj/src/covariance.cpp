#include "covariance.hpp"

#include "rng.hpp"

#include <cmath>

namespace crpred {

void DiscreteJoint::validate() const {
  if (prob.empty() || t.size() != prob.size() || s.size() != prob.size()) {
    throw ConfigError("DiscreteJoint: t, s, prob must be nonempty and equally sized");
  }
  const int kk = k(), dd = d();
  double mass = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (!(prob[i] > 0.0)) throw ConfigError("DiscreteJoint: probabilities must be positive");
    if (t[i].size() != kk || s[i].size() != dd) {
      throw ConfigError("DiscreteJoint: inconsistent point dimensions");
    }
    mass += prob[i];
  }
  if (std::abs(mass - 1.0) > 1e-12) {
    throw ConfigError("DiscreteJoint: probabilities sum to " + std::to_string(mass));
  }
}

Matrix DiscreteJoint::second_moment_s() const {
  Matrix m = Matrix::Zero(d(), d());
  for (std::size_t i = 0; i < prob.size(); ++i) m += prob[i] * s[i] * s[i].transpose();
  return m;
}

Matrix DiscreteJoint::second_moment_t() const {
  Matrix m = Matrix::Zero(k(), k());
  for (std::size_t i = 0; i < prob.size(); ++i) m += prob[i] * t[i] * t[i].transpose();
  return m;
}

Matrix DiscreteJoint::cross_moment() const {
  Matrix m = Matrix::Zero(k(), d());
  for (std::size_t i = 0; i < prob.size(); ++i) m += prob[i] * t[i] * s[i].transpose();
  return m;
}

CovarianceReport covariance_bound(const DiscreteJoint& joint, double cond_limit) {
  joint.validate();
  CovarianceReport rep;
  Matrix ess = joint.second_moment_s();
  rep.s_condition = symmetric_condition(ess);
  Matrix inv = symmetric_inverse(ess, cond_limit);
  Matrix ets = joint.cross_moment();
  rep.lhs = joint.second_moment_t();
  rep.rhs = ets * inv * ets.transpose();
  rep.residual = rep.lhs - rep.rhs;
  rep.min_eigenvalue = min_eigenvalue(rep.residual);

  Matrix coef = ets * inv;  // k x d
  double ez2 = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    Vector z = joint.t[i] - coef * joint.s[i];
    ez2 += joint.prob[i] * z.squaredNorm();
  }
  rep.equality_residual = ez2;
  return rep;
}

std::vector<double> project_onto_scores(const DiscreteJoint& joint,
                                        const std::vector<double>& u,
                                        double cond_limit) {
  joint.validate();
  if (u.size() != joint.size()) {
    throw ConfigError("project_onto_scores: u must list one value per outcome");
  }
  Matrix inv = symmetric_inverse(joint.second_moment_s(), cond_limit);
  // E(U S')
  Vector eus = Vector::Zero(joint.d());
  for (std::size_t i = 0; i < joint.size(); ++i) eus += joint.prob[i] * u[i] * joint.s[i];
  Vector coef = inv * eus;
  std::vector<double> projected(joint.size());
  for (std::size_t i = 0; i < joint.size(); ++i) projected[i] = coef.dot(joint.s[i]);
  return projected;
}

bool equality_condition_holds(const DiscreteJoint& joint, double tol) {
  return covariance_bound(joint).equality_residual <= tol;
}

DiscreteJoint random_joint(std::uint64_t seed, int max_k, int max_d, int max_points,
                           double cond_limit) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    CounterRng rng(seed, attempt);
    int k = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_k));
    int d = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_d));
    int lo = std::max(d + 1, 2);
    int n = lo;
    if (max_points > lo) {
      n = lo + static_cast<int>(rng.next_u64() %
                                static_cast<std::uint64_t>(max_points - lo + 1));
    }
    DiscreteJoint joint;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
      Vector ti(k), si(d);
      for (int j = 0; j < k; ++j) ti[j] = -2.0 + 4.0 * rng.uniform();
      for (int j = 0; j < d; ++j) si[j] = -2.0 + 4.0 * rng.uniform();
      double w = -std::log(rng.uniform());  // flat Dirichlet via exponentials
      joint.t.push_back(ti);
      joint.s.push_back(si);
      joint.prob.push_back(w);
      mass += w;
    }
    for (auto& p : joint.prob) p /= mass;
    // Exact renormalization so validate() holds bit-for-bit.
    double total = 0.0;
    for (double p : joint.prob) total += p;
    joint.prob.back() += 1.0 - total;
    if (joint.prob.back() <= 0.0) continue;
    if (symmetric_condition(joint.second_moment_s()) >= cond_limit) continue;
    return joint;
  }
}

}  // namespace crpred
