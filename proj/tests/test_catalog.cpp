#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "catalog.hpp"
#include "l2diff.hpp"

#include <cmath>

using namespace crpred;

namespace {

Vector vec1(double v) {
  Vector x(1);
  x[0] = v;
  return x;
}

}  // namespace

TEST_CASE("identifier parsing") {
  CatalogEntry g = make_catalog_entry("gaussian_location:n=10,sigma=1");
  CHECK(g.model->obs_dim == 10);
  CatalogEntry p = make_catalog_entry("poisson");
  CHECK(p.model->obs_dim == 1);
  CatalogEntry a = make_catalog_entry("ar1:n=5");
  CHECK(a.model->obs_dim == 6);

  CHECK_THROWS_AS(make_catalog_entry("no_such_model"), ConfigError);
  CHECK_THROWS_AS(make_catalog_entry("poisson:k=2"), ConfigError);
  CHECK_THROWS_AS(make_catalog_entry("poisson:n=1.5"), ConfigError);
  CHECK_THROWS_AS(make_catalog_entry("poisson:n=oops"), ConfigError);
  CHECK_THROWS_AS(make_catalog_entry("gaussian_location:n=0"), ConfigError);

  CatalogEntry b = make_catalog_entry("bernoulli:n=2");
  CHECK_THROWS_AS(b.predictand("nope"), ConfigError);
  CHECK_THROWS_AS(b.predictor("nope"), ConfigError);
}

TEST_CASE("closed forms match the numeric pipeline") {
  IntegrationSpec spec;  // auto
  for (const auto& entry : {gaussian_location(10, 1.0), bernoulli(1), poisson(1),
                            gaussian_mean2(), expfam_gauss()}) {
    if (!entry.closed_forms.fisher) continue;
    for (const auto& theta : entry.default_theta_grid) {
      FisherResult I = fisher_information(*entry.model, theta, spec);
      Matrix expected = entry.closed_forms.fisher(theta);
      CHECK((I.value - expected).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("gaussian closed-form score and bound") {
  auto g = gaussian_location(10, 1.0);
  CHECK(g.closed_forms.fisher(vec1(0.0))(0, 0) == 10.0);
  CHECK(g.closed_forms.unbiased_bound_theta(vec1(0.3))(0, 0) == doctest::Approx(0.1));
  auto g1 = gaussian_location(1, 1.0);
  CHECK(score(*g1.model, vec1(0.5), vec1(1.5))[0] == doctest::Approx(1.0));
}

TEST_CASE("bernoulli and poisson natural parameters") {
  auto bern = bernoulli(1);
  CHECK(bern.closed_forms.natural_A(vec1(0.25), vec1(0.5))[0] ==
        doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-12));
  CHECK(bern.closed_forms.fisher(vec1(0.5))(0, 0) == doctest::Approx(4.0));
  auto pois = poisson(1);
  CHECK(pois.closed_forms.fisher(vec1(2.0))(0, 0) == doctest::Approx(0.5));
  CHECK(pois.closed_forms.natural_A(vec1(2.0), vec1(1.0))[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("ar1 stationary variance and innovation variance") {
  auto ar = ar1_prediction(20);
  CHECK(ar.closed_forms.stationary_variance(vec1(0.5)) == doctest::Approx(4.0 / 3.0));
  CHECK(ar.closed_forms.incompressible == 1.0);

  // Monte Carlo check of the stationary variance at theta = 0.5.
  SampleBatch batch = sample(*ar.model, vec1(0.5), 50000, 3);
  double var = 0.0;
  for (const auto& x : batch.observations) var += x[0] * x[0];
  var /= static_cast<double>(batch.observations.size());
  CHECK(std::abs(var - 4.0 / 3.0) <= 0.05);

  // The predictor must not peek at the unobserved coordinate.
  Observation a = batch.observations.front();
  Observation b = a;
  b[20] += 100.0;
  const Predictor& plugin = ar.predictor("plugin_next");
  CHECK(plugin.p(a)[0] == plugin.p(b)[0]);
}

TEST_CASE("degenerate builder family has singular fisher information") {
  auto base = gaussian_location(1, 1.0).model;
  Predictor p;
  p.k = 1;
  p.p = [](const Observation& x) { return x; };
  ParameterDomain dom;
  dom.dim = 1;
  dom.contains = [](const Vector& t) { return std::isfinite(t[0]); };
  auto A = [](const Vector&) { return Vector::Zero(1); };
  auto B = [](const Observation&, const Vector&) { return 0.0; };
  std::vector<Vector> grid = {vec1(0.0), vec1(1.0)};
  CatalogEntry flat = exponential_family_builder(p, A, B, base, vec1(0.0), dom, grid);
  FisherResult I = fisher_information(*flat.model, vec1(0.5), IntegrationSpec::quadrature(64));
  CHECK(I.value(0, 0) <= 1e-10);
  CHECK_THROWS_AS(symmetric_inverse(I.value), SingularError);
}

TEST_CASE("uniform model samples inside the support") {
  auto uni = uniform_scale();
  SampleBatch batch = sample(*uni.model, vec1(2.0), 1000, 11);
  for (const auto& x : batch.observations) {
    CHECK(x[0] > 0.0);
    CHECK(x[0] < 2.0);
  }
}
