#pragma once

#include "bounds.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace crpred {

// Closed-form companions to a catalog model; every populated entry is
// cross-checked against the numeric pipeline in the test suites.
struct ClosedForms {
  std::function<Matrix(const Vector&)> fisher;
  std::function<Matrix(const Vector&)> unbiased_bound_theta;  // for g(x,theta)=theta
  // Natural parameter A(theta) of the reconstruction, anchored at theta0.
  std::function<Vector(const Vector&, const Vector&)> natural_A;
  std::function<double(const Vector&)> stationary_variance;  // AR(1)
  double incompressible = std::numeric_limits<double>::quiet_NaN();  // AR(1)
};

struct CatalogEntry {
  std::shared_ptr<const DominatedModel> model;
  std::map<std::string, Predictand> predictands;
  std::map<std::string, Predictor> predictors;
  std::map<std::string, BiasedPredictand> biased_predictands;
  ClosedForms closed_forms;
  std::vector<Vector> default_theta_grid;

  const Predictand& predictand(const std::string& name) const;
  const Predictor& predictor(const std::string& name) const;
  const BiasedPredictand& biased_predictand(const std::string& name) const;
};

// n iid N(theta, sigma^2) observations.
// Score sum(x_i - theta)/sigma^2, I = n/sigma^2, mean-predictor QEP sigma^2/n.
CatalogEntry gaussian_location(int n, double sigma);

// n iid Bernoulli(theta); I = n/(theta(1-theta)), natural parameter logit.
CatalogEntry bernoulli(int n);

// n iid Poisson(theta); I = n/theta, natural parameter log(theta).
CatalogEntry poisson(int n);

// Stationary zero-mean Gaussian AR(1) of length n with unit innovations,
// plus the next value as unobserved target. The conditional-mean predictand
// theta * x_n has G = E x_n = 0: the degenerate-bound showcase.
CatalogEntry ar1_prediction(int n);

// Single observation N(theta, I_2), theta in R^2; the two-parameter case
// for path-independence checks.
CatalogEntry gaussian_mean2();

// Uniform(0, theta): theta-dependent support, the documented
// non-L2-differentiable counterexample.
CatalogEntry uniform_scale();

// Family d P_theta / d base = exp(A(theta)' p(x) - B(x, theta)); the
// normalization is checked on `check_grid` at construction.
CatalogEntry exponential_family_builder(
    const Predictor& p, std::function<Vector(const Vector&)> A,
    std::function<double(const Observation&, const Vector&)> B,
    std::shared_ptr<const DominatedModel> base, const Vector& base_theta,
    ParameterDomain domain, const std::vector<Vector>& check_grid,
    std::function<std::vector<std::pair<double, double>>(const Vector&)> quad_hint =
        nullptr,
    double tol = 1e-6);

// The canned builder instance A(theta)=theta, B=theta^2/2 over a standard
// normal base with p(x)=x (recovers N(theta,1)).
CatalogEntry expfam_gauss();

// Parses identifiers like "gaussian_location:n=10,sigma=1". Unknown names
// or keys are rejected.
CatalogEntry make_catalog_entry(const std::string& id);

std::vector<std::string> catalog_ids();

}  // namespace crpred
