#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "catalog.hpp"
#include "reconstruction.hpp"

#include <cmath>

using namespace crpred;

namespace {

Vector vec1(double v) {
  Vector x(1);
  x[0] = v;
  return x;
}

Vector vec2(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST_CASE("path integrand closed forms") {
  IntegrationSpec quad = IntegrationSpec::quadrature(96);
  auto g1 = gaussian_location(1, 1.0);
  ParameterPath path = ParameterPath::straight(vec1(0.0), vec1(1.0), 100);
  for (double s : {0.0, 0.3, 0.8, 1.0}) {
    Eigen::RowVectorXd row = path_integrand(*g1.model, s, path, g1.predictand("theta"), quad);
    CHECK(row(0) == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Zero-length path: theta_dot = 0 everywhere.
  ParameterPath still = ParameterPath::straight(vec1(0.5), vec1(0.5), 16);
  CHECK(path_integrand(*g1.model, 0.5, still, g1.predictand("theta"), quad)(0) == 0.0);

  auto bern = bernoulli(1);
  ParameterPath bpath = ParameterPath::straight(vec1(0.3), vec1(0.6), 100);
  IntegrationSpec exact = IntegrationSpec::exact();
  for (double s : {0.25, 0.75}) {
    double theta = 0.3 + 0.3 * s;
    double expected = 0.3 / (theta * (1.0 - theta));
    CHECK(path_integrand(*bern.model, s, bpath, bern.predictand("theta"), exact)(0) ==
          doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("reconstruct_A closed forms") {
  IntegrationSpec quad = IntegrationSpec::quadrature(96);
  auto g1 = gaussian_location(1, 1.0);
  ReconstructionResult a =
      reconstruct_A(*g1.model, ParameterPath::straight(vec1(0.0), vec1(1.0), 400),
                    g1.predictand("theta"), quad);
  CHECK(std::abs(a.A[0] - 1.0) <= 1e-6);
  CHECK(a.error_estimate <= 1e-6);
  CHECK(a.integrand_samples.size() >= 401);

  ReconstructionResult zero =
      reconstruct_A(*g1.model, ParameterPath::straight(vec1(0.5), vec1(0.5), 16),
                    g1.predictand("theta"), quad);
  CHECK(zero.A[0] == 0.0);

  auto bern = bernoulli(1);
  for (double theta : {0.25, 0.6, 0.75}) {
    ReconstructionResult ab =
        reconstruct_A(*bern.model, ParameterPath::straight(vec1(0.5), vec1(theta), 400),
                      bern.predictand("theta"), IntegrationSpec::exact());
    double logit = std::log(theta / (1.0 - theta));
    CHECK(std::abs(ab.A[0] - logit) <= 1e-6);
  }
}

TEST_CASE("simpson refinement converges at the expected rate") {
  auto bern = bernoulli(1);
  IntegrationSpec exact = IntegrationSpec::exact();
  const Predictand& g = bern.predictand("theta");
  ParameterPath coarse = ParameterPath::straight(vec1(0.5), vec1(0.9), 16);
  ParameterPath fine = ParameterPath::straight(vec1(0.5), vec1(0.9), 32);
  ReconstructionResult ac = reconstruct_A(*bern.model, coarse, g, exact);
  ReconstructionResult af = reconstruct_A(*bern.model, fine, g, exact);
  double truth = std::log(0.9 / 0.1);
  double err_c = std::abs(ac.A[0] - truth);
  double err_f = std::abs(af.A[0] - truth);
  CHECK(err_f * 8.0 <= err_c + 1e-14);  // Simpson: factor >= 8 per doubling
  CHECK(std::abs(af.A[0] - ac.A[0]) <= 2.0 * ac.error_estimate + 1e-14);
}

TEST_CASE("reconstruct_B closed forms") {
  IntegrationSpec quad = IntegrationSpec::quadrature(96);
  auto g1 = gaussian_location(1, 1.0);
  const Predictand& g = g1.predictand("theta");
  ParameterPath path = ParameterPath::straight(vec1(0.0), vec1(1.0), 400);
  // Estimation case: B = theta^2/2 independently of x.
  for (double x : {-2.0, 0.0, 1.5}) {
    BValue b = reconstruct_B(*g1.model, path, g, vec1(x), quad);
    CHECK(std::abs(b.value - 0.5) <= 1e-6);
  }
  BValue zero = reconstruct_B(*g1.model, ParameterPath::straight(vec1(0.0), vec1(0.0), 16),
                              g, vec1(1.0), quad);
  CHECK(zero.value == 0.0);
}

TEST_CASE("x-independence of B in the estimation specialization") {
  IntegrationSpec quad = IntegrationSpec::quadrature(96);
  auto g1 = gaussian_location(1, 1.0);
  PathTable table(*g1.model, ParameterPath::straight(vec1(0.0), vec1(1.0), 400),
                  g1.predictand("theta"), quad);
  double lo = 1e300, hi = -1e300;
  for (double x = -3.0; x <= 3.0; x += 0.5) {
    double b = table.B(vec1(x));
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }
  CHECK(hi - lo <= 1e-6);
}

TEST_CASE("path independence in the two-parameter gaussian") {
  IntegrationSpec quad = IntegrationSpec::quadrature(64);
  auto m2 = gaussian_mean2();
  const Predictand& g = m2.predictand("theta");
  ParameterPath straight = ParameterPath::straight(vec2(0.0, 0.0), vec2(1.0, 1.0), 200);
  ParameterPath elbow;
  elbow.waypoints = {vec2(0.0, 0.0), vec2(1.0, 0.0), vec2(1.0, 1.0)};
  elbow.steps = 200;
  PathIndependenceReport rep = path_independence_check(*m2.model, straight, elbow, g, quad);
  CHECK(rep.delta_A <= 1e-5);
  CHECK(rep.jacobian_condition_residual <= 1e-4);

  PathIndependenceReport same = path_independence_check(*m2.model, straight, straight, g, quad);
  CHECK(same.delta_A == 0.0);

  // d = 1: any two paths re-parametrize the same segment.
  auto g1 = gaussian_location(1, 1.0);
  ParameterPath a = ParameterPath::straight(vec1(0.0), vec1(1.0), 128);
  ParameterPath b;
  b.waypoints = {vec1(0.0), vec1(0.25), vec1(1.0)};
  b.steps = 128;
  PathIndependenceReport rep1 =
      path_independence_check(*g1.model, a, b, g1.predictand("theta"), quad);
  CHECK(rep1.delta_A <= 1e-8);

  ParameterPath mismatched = ParameterPath::straight(vec1(0.0), vec1(0.9), 128);
  CHECK_THROWS_AS(
      path_independence_check(*g1.model, a, mismatched, g1.predictand("theta"), quad),
      ConfigError);
}

TEST_CASE("density ratio validation") {
  IntegrationSpec quad = IntegrationSpec::quadrature(96);
  auto g1 = gaussian_location(1, 1.0);
  const Predictand& g = g1.predictand("theta");
  const Predictor& p = g1.predictor("mean");

  SUBCASE("gaussian ratio matches exp(theta x - theta^2/2)") {
    ParameterPath path = ParameterPath::straight(vec1(0.0), vec1(1.0), 400);
    DensityRatioReport rep =
        validate_density_ratio(*g1.model, vec1(0.0), vec1(1.0), path, p, g, quad, 100, 5);
    CHECK(std::abs(rep.normalization - 1.0) <= 1e-3);
    CHECK(rep.pointwise_max_abs_log_error <= 1e-5);
    CHECK(rep.points_checked == 100);
  }

  SUBCASE("zero-length path gives the unit ratio") {
    ParameterPath path = ParameterPath::straight(vec1(0.5), vec1(0.5), 16);
    DensityRatioReport rep =
        validate_density_ratio(*g1.model, vec1(0.5), vec1(0.5), path, p, g, quad, 50, 6);
    CHECK(rep.pointwise_max_abs_log_error <= 1e-12);
    CHECK(std::abs(rep.normalization - 1.0) <= 1e-9);
  }

  SUBCASE("bernoulli two-point support") {
    auto bern = bernoulli(1);
    Predictor id;
    id.k = 1;
    id.p = [](const Observation& x) { return x; };
    ParameterPath path = ParameterPath::straight(vec1(0.5), vec1(0.25), 400);
    DensityRatioReport rep =
        validate_density_ratio(*bern.model, vec1(0.5), vec1(0.25), path, id,
                               bern.predictand("theta"), IntegrationSpec::exact(), 10, 7);
    CHECK(rep.pointwise_max_abs_log_error <= 1e-6);
    CHECK(std::abs(rep.normalization - 1.0) <= 1e-9);
  }
}

TEST_CASE("gradient condition") {
  IntegrationSpec quad = IntegrationSpec::quadrature(96);
  auto g1 = gaussian_location(1, 1.0);
  const Predictand& g = g1.predictand("theta");
  std::vector<Observation> xs = {vec1(-1.0), vec1(0.0), vec1(2.0)};

  double res = gradient_condition_check(*g1.model, vec1(0.0), vec1(1.0), g, xs, quad, 200);
  CHECK(res <= 1e-4);

  // Central differences across theta0 itself.
  double res0 = gradient_condition_check(*g1.model, vec1(0.5), vec1(0.5), g, xs, quad, 64);
  CHECK(res0 <= 1e-4);

  // A predictand that is identically zero makes G singular; the path
  // machinery refuses rather than detouring.
  Predictand zero;
  zero.k = 1;
  zero.g = [](const Observation&, const Vector&) { return vec1(0.0); };
  zero.jacobian = [](const Observation&, const Vector&) { return Matrix::Zero(1, 1); };
  CHECK_THROWS_AS(
      gradient_condition_check(*g1.model, vec1(0.0), vec1(1.0), zero, xs, quad, 64),
      SingularError);
}

TEST_CASE("builder round trip recovers the declared natural parameter") {
  auto ef = expfam_gauss();
  IntegrationSpec quad = IntegrationSpec::quadrature(96);
  for (double theta : {0.25, 0.5, 1.0}) {
    ReconstructionResult a =
        reconstruct_A(*ef.model, ParameterPath::straight(vec1(0.0), vec1(theta), 200),
                      ef.predictand("theta"), quad);
    CHECK(std::abs(a.A[0] - theta) <= 1e-5);
  }
}

TEST_CASE("builder rejects unnormalized families") {
  auto base = gaussian_location(1, 1.0).model;
  Predictor p;
  p.k = 1;
  p.p = [](const Observation& x) { return x; };
  ParameterDomain dom;
  dom.dim = 1;
  dom.contains = [](const Vector& t) { return std::isfinite(t[0]); };
  // Wrong log-partition: mass far from one.
  auto A = [](const Vector& t) { return t; };
  auto B = [](const Observation&, const Vector& t) { return 0.1 * t[0] * t[0]; };
  std::vector<Vector> grid = {vec1(1.0)};
  CHECK_THROWS_AS(exponential_family_builder(p, A, B, base, vec1(0.0), dom, grid),
                  ConfigError);
}

TEST_CASE("paths must stay inside the domain") {
  auto bern = bernoulli(1);
  ParameterPath path = ParameterPath::straight(vec1(0.5), vec1(1.2), 64);
  CHECK_THROWS_AS(
      reconstruct_A(*bern.model, path, bern.predictand("theta"), IntegrationSpec::exact()),
      DomainError);
}
