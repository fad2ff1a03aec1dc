#pragma once

#include "expectation.hpp"

#include <utility>
#include <vector>

namespace crpred {

struct FisherResult {
  Matrix value;      // symmetric, PSD up to numerics
  Matrix std_error;  // entrywise, zeros in deterministic modes
  std::string mode_used;
};

struct ScoreMeanResult {
  Vector value;
  Vector std_error;
  std::string mode_used;
};

struct HellingerRemainder {
  double value = 0.0;
  double std_error = 0.0;
  std::string mode_used;
};

// L2-derivative (score) at (x, theta): the analytic score when the model
// declares one, otherwise central finite differences of log f in each
// parameter coordinate with step `step * (1 + |theta_i|)`.
Vector score(const DominatedModel& model, const Vector& theta, const Observation& x,
             double step = 1e-5);

// I(theta) = E_theta[score score'], symmetrized. For iid product models
// whose full observation space defeats deterministic integration, uses the
// exact additivity identity I_n = n E1[ss'] + n(n-1) (E1 s)(E1 s)'.
FisherResult fisher_information(const DominatedModel& model, const Vector& theta,
                                const IntegrationSpec& spec);

// E_theta[score]; a zero-mean check.
ScoreMeanResult score_mean(const DominatedModel& model, const Vector& theta,
                           const IntegrationSpec& spec);

// E_theta0 (sqrt(L_theta0(u)) - 1 - u' score / 2)^2. Raises
// AbsContinuityError when P_{theta0+u} puts detectable mass where f_theta0
// vanishes.
HellingerRemainder hellinger_remainder(const DominatedModel& model,
                                       const Vector& theta0, const Vector& u,
                                       const IntegrationSpec& spec);

struct HellingerDiagnostic {
  std::vector<double> u_norms;     // strictly decreasing
  std::vector<double> remainders;  // >= 0
  std::vector<double> std_errors;
  std::vector<bool> dropped;  // below the Monte Carlo noise floor, excluded from fit
  double fitted_exponent = 0.0;  // log-log slope of remainder vs ||u||
  bool passes = false;           // slope > 1, the o(||u||) criterion
};

// Fits the decay rate of the Hellinger remainder along a geometrically
// decreasing step sequence (at least 5 steps).
HellingerDiagnostic check_l2_diff(const DominatedModel& model, const Vector& theta0,
                                  const std::vector<Vector>& u_sequence,
                                  const IntegrationSpec& spec);

struct Lemma106Report {
  std::vector<double> u_norms;
  std::vector<double> epsilons;
  // cond1_prob[e][j] = P_theta0(|L(u_j)-1-u' score| / ||u_j|| > epsilons[e])
  std::vector<std::vector<double>> cond1_prob;
  std::vector<std::vector<double>> cond1_std_error;
  // cond2_residual[j] = |E(sqrt L(u_j) - 1)^2 - u' I u / 4| / ||u_j||^2
  std::vector<double> cond2_residual;
  std::vector<double> cond2_std_error;
  bool cond1_pass = false;
  bool cond2_pass = false;
  std::string cond1_mode;
};

// Both characterization conditions of L2-differentiability, sampled along
// the step sequence. The probability in condition 1 involves an indicator
// integrand, so for continuous models it is always estimated by seeded
// Monte Carlo (quadrature cannot resolve the discontinuity); counting
// models use exact sums.
Lemma106Report check_lemma_106(const DominatedModel& model, const Vector& theta0,
                               const std::vector<Vector>& u_sequence,
                               const IntegrationSpec& spec);

struct ContinuityReport {
  std::vector<double> distances;  // ||theta_j - theta0||
  std::vector<double> residuals;
  std::vector<double> std_errors;
  bool passes = false;
  bool weighted_variant = false;
  double tol = 1e-3;
};

// Continuous L2-differentiability residual along theta_j -> theta0.
// Canonical form integrates against the dominating measure,
//   int || sqrt(f_theta) score_theta - sqrt(f_theta0) score_theta0 ||^2 dnu,
// evaluated as E_theta0 || sqrt(L_{theta0,theta}) score_theta - score_theta0 ||^2.
// The weighted variant keys the square root by L_{theta,theta0} instead.
ContinuityReport check_continuous_l2(const DominatedModel& model, const Vector& theta0,
                                     const std::vector<Vector>& theta_sequence,
                                     const IntegrationSpec& spec,
                                     bool weighted_variant = false, double tol = 1e-3);

// Geometric step ladder u_j = direction * base * factor^j, j = 0..count-1.
std::vector<Vector> geometric_steps(const Vector& direction, double base, double factor,
                                    int count);

}  // namespace crpred
