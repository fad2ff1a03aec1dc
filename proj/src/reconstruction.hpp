#pragma once

#include "bounds.hpp"

#include <optional>
#include <vector>

namespace crpred {

// Piecewise-linear parameter path; each leg is continuously differentiable
// and the line integral is accumulated leg by leg. `steps` counts Simpson
// intervals over the whole path (rounded up per leg to a multiple of 4 so
// the half-resolution rule reuses the same nodes).
struct ParameterPath {
  std::vector<Vector> waypoints;
  int steps = 1000;

  static ParameterPath straight(const Vector& from, const Vector& to, int steps = 1000);

  const Vector& start() const { return waypoints.front(); }
  const Vector& end() const { return waypoints.back(); }
  void validate(const ParameterDomain& domain) const;

  // Global parametrization on [0,1]: legs traversed uniformly.
  Vector theta_at(double s) const;
  Vector theta_dot_at(double s) const;
};

// Cached per-node data: theta_s, the integrand row theta_dot' I(theta_s)
// G(theta_s)^{-1}, and Simpson weights at full and half resolution. Lets
// A and every B(x) reuse one pass of Fisher/G evaluations.
class PathTable {
 public:
  PathTable(const DominatedModel& model, const ParameterPath& path, const Predictand& g,
            const IntegrationSpec& spec, const Predictor* general_form_p = nullptr);

  Vector A() const { return a_fine_; }
  double a_error_estimate() const { return a_error_; }

  double B(const Observation& x) const;
  double b_error_estimate(const Observation& x) const;

  const std::vector<Eigen::RowVectorXd>& integrand_samples() const { return rows_; }

 private:
  const DominatedModel* model_;
  Predictand g_;
  std::vector<Vector> thetas_;
  std::vector<Eigen::RowVectorXd> rows_;
  std::vector<double> w_fine_, w_coarse_;
  Vector a_fine_;
  double a_error_ = 0.0;
};

struct ReconstructionResult {
  Vector A;
  double error_estimate = 0.0;
  std::vector<Eigen::RowVectorXd> integrand_samples;
};

struct BValue {
  double value = 0.0;
  double error_estimate = 0.0;
};

// theta_dot' I(theta_s) G(theta_s)^{-1} at global position s.
Eigen::RowVectorXd path_integrand(const DominatedModel& model, double s,
                                  const ParameterPath& path, const Predictand& g,
                                  const IntegrationSpec& spec,
                                  const Predictor* general_form_p = nullptr);

// A(theta)' = int_0^1 theta_dot' I G^{-1} ds via composite Simpson with a
// Richardson error estimate.
ReconstructionResult reconstruct_A(const DominatedModel& model, const ParameterPath& path,
                                   const Predictand& g, const IntegrationSpec& spec,
                                   const Predictor* general_form_p = nullptr);

// B(x, theta) = int_0^1 theta_dot' I G^{-1} g(x, theta_s) ds.
BValue reconstruct_B(const DominatedModel& model, const ParameterPath& path,
                     const Predictand& g, const Observation& x,
                     const IntegrationSpec& spec,
                     const Predictor* general_form_p = nullptr);

struct PathIndependenceReport {
  double delta_A = 0.0;  // || A(pathA) - A(pathB) ||_inf
  // max over a grid of || (J_theta A_rec)' - I G^{-1} ||_maxabs with J A by
  // finite differences of reconstruct_A.
  double jacobian_condition_residual = 0.0;
};

PathIndependenceReport path_independence_check(const DominatedModel& model,
                                               const ParameterPath& path_a,
                                               const ParameterPath& path_b,
                                               const Predictand& g,
                                               const IntegrationSpec& spec,
                                               const Predictor* general_form_p = nullptr);

struct DensityRatioReport {
  double normalization = 0.0;  // E_theta0 exp(A'p - B), target 1
  double normalization_std_error = 0.0;
  double pointwise_max_abs_log_error = 0.0;
  std::size_t points_checked = 0;
  bool efficiency_declared = true;
};

// Checks dP_theta/dP_theta0 = exp(A'p(x) - B(x,theta)) both in expectation
// and pointwise over a sampled set of observations. The caller declares the
// predictor efficient (or overrides for diagnostics); the flag is recorded.
DensityRatioReport validate_density_ratio(const DominatedModel& model,
                                          const Vector& theta0, const Vector& theta,
                                          const ParameterPath& path, const Predictor& p,
                                          const Predictand& g, const IntegrationSpec& spec,
                                          int n_sample_points = 100,
                                          std::uint64_t seed = 1,
                                          bool efficiency_declared = true);

// max over x_sample of || FD grad_theta B(x, theta) - I G^{-1} g(x, theta) ||_inf,
// with B built from straight paths theta0 -> theta +/- h e_j.
double gradient_condition_check(const DominatedModel& model, const Vector& theta0,
                                const Vector& theta, const Predictand& g,
                                const std::vector<Observation>& x_sample,
                                const IntegrationSpec& spec, int steps = 400,
                                const Predictor* general_form_p = nullptr);

}  // namespace crpred
