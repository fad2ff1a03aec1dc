#pragma once

#include "l2diff.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace crpred {

// Target of prediction g(X, theta) in R^k; may depend on the observation.
struct Predictand {
  int k = 1;
  std::function<Vector(const Observation&, const Vector&)> g;
  // k x d Jacobian in theta; when null, central finite differences of g are
  // used with step 1e-5 * (1 + |theta_i|).
  std::function<Matrix(const Observation&, const Vector&)> jacobian;

  Matrix jacobian_at(const Observation& x, const Vector& theta,
                     const ParameterDomain& domain) const;
};

// Measurable map of the observation only; never sees theta.
struct Predictor {
  int k = 1;
  std::function<Vector(const Observation&)> p;
};

// r(X, theta) predicted with bias b(theta); the unbiased target is r + b.
struct BiasedPredictand {
  Predictand r;
  std::function<Vector(const Vector&)> bias;           // null: estimated from p
  std::function<Matrix(const Vector&)> bias_jacobian;  // null: finite differences
};

struct BoundReport {
  Matrix qep;
  Matrix qep_std_error;
  Matrix bound;
  Matrix gap;  // qep - bound
  double gap_min_eigenvalue = 0.0;
  double equality_residual = 0.0;
  double equality_residual_std_error = 0.0;
  Matrix G_used;
  Matrix I_used;
  std::string form;  // "simplified" | "general" | "biased"
  Vector bias_used;  // empty unless form == "biased"
};

// Quadratic error of prediction E_theta (p - g)(p - g)'.
ExpectationResult qep(const DominatedModel& model, const Vector& theta,
                      const Predictor& p, const Predictand& g,
                      const IntegrationSpec& spec);

struct MsepDecomposition {
  ExpectationResult total;           // E (p - g)^x2
  ExpectationResult qep_term;        // E (p - r)^x2
  ExpectationResult incompressible;  // E (r - g)^x2
  double residual_norm = 0.0;        // || total - qep - incompressible ||_inf
  double residual_allowance = 0.0;   // 3 * combined std errors
  bool consistent = false;  // false flags that the supplied r is not E[g|X]
};

// Splits the mean squared error of prediction against the caller-supplied
// conditional target r(X, theta) = E_theta[g | X].
MsepDecomposition msep_decompose(const DominatedModel& joint_model, const Vector& theta,
                                 const Predictor& p, const Predictand& g_xy,
                                 const Predictand& r, const IntegrationSpec& spec);

// Jacobian of psi(theta) = E_theta[delta(X)] via E_theta[delta score'].
ExpectationResult psi_jacobian(const DominatedModel& model, const Vector& theta,
                               const Predictor& delta, const IntegrationSpec& spec);

// Central finite differences of theta -> E_theta[delta(X)]; common-seed
// cross-check for psi_jacobian.
Matrix psi_jacobian_fd(const DominatedModel& model, const Vector& theta,
                       const Predictor& delta, const IntegrationSpec& spec,
                       double step = 1e-3);

// G(theta) = J psi(theta) - E_theta[g score'] = E_theta[(p - g) score'].
ExpectationResult G_general(const DominatedModel& model, const Vector& theta,
                            const Predictor& p, const Predictand& g,
                            const IntegrationSpec& spec);

// G(theta) = E_theta[J_theta g(X, theta)].
ExpectationResult G_simplified(const DominatedModel& model, const Vector& theta,
                               const Predictand& g, const IntegrationSpec& spec);

// G I^{-1} G' with G = E[J g]; bound for unbiased predictors.
Matrix cr_bound_unbiased(const DominatedModel& model, const Vector& theta,
                         const Predictand& g, const IntegrationSpec& spec);

// b b' + G I^{-1} G' with G = E[J r] + J b; the predictor is only needed
// when the bias has to be estimated on the fly.
Matrix cr_bound_biased(const DominatedModel& model, const Vector& theta,
                       const BiasedPredictand& rb, const IntegrationSpec& spec,
                       const Predictor* p_for_bias = nullptr);

struct EfficiencyResidual {
  double value = 0.0;
  double std_error = 0.0;
  std::string form;  // which G entered the equality condition
};

// E || p - g - G I^{-1} score ||^2; zero (within noise) iff the predictor
// attains the bound at theta.
EfficiencyResidual efficiency_residual(const DominatedModel& model, const Vector& theta,
                                       const Predictor& p, const Predictand& g,
                                       const IntegrationSpec& spec);

struct EfficiencyGap {
  Matrix gap;
  double min_eigenvalue = 0.0;
  bool is_efficient = false;
};

EfficiencyGap efficiency_gap(const Matrix& qep_value, const Matrix& bound, double tol);

// Full per-theta report: QEP, the bound in the form the data supports
// (verified unbiasedness picks the simplified form, anything else the
// biased form with estimated bias), gap and equality residual.
BoundReport bound_report(const DominatedModel& model, const Vector& theta,
                         const Predictor& p, const Predictand& g,
                         const IntegrationSpec& spec);

struct AssumptionItem {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string note;
};

struct AssumptionReport {
  std::vector<AssumptionItem> items;
  bool all_pass = false;
  std::size_t grid_size = 0;
};

// Samples the moment conditions behind the prediction bound over a finite
// neighbourhood grid: Fisher invertibility, sup E||p||^2, sup E||J g||^2
// over parameter pairs, sup E L^2 over parameter pairs. Grid suprema are
// evidence, not proof; divergence is flagged by box-doubling instability in
// quadrature and by relative-error blowup in Monte Carlo.
AssumptionReport check_assumptions(const DominatedModel& model, const Vector& theta0,
                                   const std::vector<Vector>& neighborhood,
                                   const Predictor& p, const Predictand& g,
                                   const IntegrationSpec& spec);

// Verified unbiasedness at theta: || E p - E g || <= max(1e-3, 3 sigma).
bool unbiasedness_holds(const DominatedModel& model, const Vector& theta,
                        const Predictor& p, const Predictand& g,
                        const IntegrationSpec& spec);

}  // namespace crpred
