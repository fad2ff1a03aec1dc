#pragma once

#include "model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace crpred {

enum class IntegrationMode { Auto, ExactDiscrete, Quadrature, MonteCarlo };

// How to realize E_theta[h(X)]. `Auto` resolves per model: exact sums for
// enumerable counting models, tensor Gauss-Legendre quadrature for
// continuous models up to dimension 4, seeded Monte Carlo otherwise.
struct IntegrationSpec {
  IntegrationMode mode = IntegrationMode::Auto;

  // Quadrature: nodes per axis (>= 15); 0 picks a dimension-based default.
  int quad_nodes = 0;
  // Half-width of the quadrature box in units of the model scale hint.
  double box_sigmas = 10.0;
  // Explicit per-axis box override (diagnostics only).
  std::optional<std::vector<std::pair<double, double>>> quad_box;

  // Monte Carlo sample size (>= 100) and seed.
  long long mc_n = 100000;
  std::uint64_t seed = 1;
  // Worker count for sharded Monte Carlo; results are identical to the
  // single-worker run by construction (fixed blocks, ordered reduction).
  int workers = 1;

  // Advisory only; reported mismatches are the caller's business.
  double target_rel_tol = 1e-8;

  static IntegrationSpec exact();
  static IntegrationSpec quadrature(int nodes_per_axis = 0);
  static IntegrationSpec monte_carlo(long long n, std::uint64_t seed);

  void validate() const;
};

struct ExpectationResult {
  Matrix value;
  Matrix std_error;  // zeros in deterministic modes
  long long n_effective = 0;
  std::string mode_used;
};

using MatrixFn = std::function<Matrix(const Observation&)>;
using ScalarFn = std::function<double(const Observation&)>;

// E_theta[h(X)] for a matrix-valued integrand.
ExpectationResult expect(const DominatedModel& model, const Vector& theta,
                         const MatrixFn& h, const IntegrationSpec& spec);

ExpectationResult expect_scalar(const DominatedModel& model, const Vector& theta,
                                const ScalarFn& h, const IntegrationSpec& spec);

// E_theta[h(X)] computed as E_theta0[L_{theta0,theta} h(X)]. Raises
// AbsContinuityError when the ratio is +inf on a positive-mass set.
ExpectationResult expect_under_shifted(const DominatedModel& model,
                                       const Vector& theta0, const Vector& theta,
                                       const MatrixFn& h, const IntegrationSpec& spec);

// The concrete mode Auto resolution would use for this model, or validation
// of an explicitly requested mode. Throws CapabilityError when the request
// cannot be realized.
IntegrationMode resolve_mode(const DominatedModel& model, const IntegrationSpec& spec);

// True when `resolve_mode` yields a deterministic (exact or quadrature) mode.
bool deterministic_feasible(const DominatedModel& model, const IntegrationSpec& spec);

// Gauss-Legendre nodes and weights on [-1, 1].
void legendre_rule(int n, std::vector<double>& nodes, std::vector<double>& weights);

const char* to_string(IntegrationMode mode);

}  // namespace crpred
