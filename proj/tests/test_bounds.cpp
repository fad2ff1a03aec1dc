#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "bounds.hpp"
#include "catalog.hpp"
#include "rng.hpp"

#include <cmath>

using namespace crpred;

namespace {

Vector vec1(double v) {
  Vector x(1);
  x[0] = v;
  return x;
}

IntegrationSpec mc(long long n, std::uint64_t seed) {
  return IntegrationSpec::monte_carlo(n, seed);
}

}  // namespace

TEST_CASE("qep closed forms") {
  auto g10 = gaussian_location(10, 1.0);
  const Predictand& g = g10.predictand("theta");
  const Predictor& mean = g10.predictor("mean");

  SUBCASE("oracle predictor at the evaluation point has zero risk") {
    Vector theta = vec1(0.7);
    Predictor oracle;
    oracle.k = 1;
    oracle.p = [&g, theta](const Observation& x) { return g.g(x, theta); };
    ExpectationResult q = qep(*g10.model, theta, oracle, g, mc(2000, 4));
    CHECK(q.value(0, 0) == 0.0);
  }

  SUBCASE("sample mean risk 1/n") {
    ExpectationResult q = qep(*g10.model, vec1(0.5), mean, g, mc(100000, 7));
    CHECK(std::abs(q.value(0, 0) - 0.1) <= 3.0 * q.std_error(0, 0));
  }

  SUBCASE("shrunk mean risk c^2/n + (c-1)^2 theta^2") {
    ExpectationResult q =
        qep(*g10.model, vec1(1.0), g10.predictor("mean_scaled_0.9"), g, mc(100000, 8));
    CHECK(std::abs(q.value(0, 0) - 0.091) <= 3.0 * q.std_error(0, 0));
  }
}

TEST_CASE("msep decomposition") {
  SUBCASE("independent target reduces to variance plus incompressible part") {
    // X ~ N(theta,1), Y ~ N(0,1) independent; g = y, r = 0, p = 0.
    auto m = std::make_shared<DominatedModel>();
    m->name = "gauss_with_independent_y";
    m->domain.dim = 1;
    m->domain.contains = [](const Vector& t) { return std::isfinite(t[0]); };
    m->measure = MeasureKind::Lebesgue;
    m->obs_dim = 2;
    m->log_density = [](const Observation& x, const Vector& t) {
      double a = x[0] - t[0], b = x[1];
      return -1.8378770664093454 - 0.5 * (a * a + b * b);
    };
    m->sampler = [](const Vector& t, long long count, std::uint64_t seed) {
      std::vector<Observation> out;
      for (long long i = 0; i < count; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        Observation x(2);
        x[0] = t[0] + rng.normal();
        x[1] = rng.normal();
        out.push_back(x);
      }
      return out;
    };
    m->quad_hint = [](const Vector& t) {
      return std::vector<std::pair<double, double>>{{t[0], 1.0}, {0.0, 1.0}};
    };

    Predictand g;
    g.k = 1;
    g.g = [](const Observation& x, const Vector&) { return vec1(x[1]); };
    Predictand r;
    r.k = 1;
    r.g = [](const Observation&, const Vector&) { return vec1(0.0); };
    Predictor p;
    p.k = 1;
    p.p = [](const Observation&) { return vec1(0.0); };

    MsepDecomposition dec = msep_decompose(*m, vec1(0.3), p, g, r, mc(50000, 5));
    CHECK(dec.consistent);
    CHECK(std::abs(dec.incompressible.value(0, 0) - 1.0) <=
          3.0 * dec.incompressible.std_error(0, 0));
    CHECK(dec.qep_term.value(0, 0) == 0.0);
  }

  SUBCASE("g equal to r leaves no incompressible part") {
    auto ar = ar1_prediction(10);
    const Predictand& r = ar.predictand("cond_mean");
    MsepDecomposition dec = msep_decompose(*ar.model, vec1(0.5), ar.predictor("plugin_next"),
                                           r, r, mc(20000, 6));
    CHECK(dec.incompressible.value(0, 0) == 0.0);
    CHECK(dec.consistent);
  }

  SUBCASE("ar1 forecast decomposition holds within noise") {
    auto ar = ar1_prediction(20);
    MsepDecomposition dec =
        msep_decompose(*ar.model, vec1(0.5), ar.predictor("plugin_next"),
                       ar.predictand("next"), ar.predictand("cond_mean"), mc(100000, 9));
    CHECK(dec.consistent);
    CHECK(std::abs(dec.incompressible.value(0, 0) - 1.0) <=
          3.0 * dec.incompressible.std_error(0, 0));
  }
}

TEST_CASE("psi jacobian") {
  SUBCASE("sample mean of an iid gaussian has unit sensitivity") {
    auto g10 = gaussian_location(10, 1.0);
    ExpectationResult j =
        psi_jacobian(*g10.model, vec1(0.5), g10.predictor("mean"), mc(100000, 3));
    CHECK(std::abs(j.value(0, 0) - 1.0) <= std::max(1e-2, 3.0 * j.std_error(0, 0)));
  }
  SUBCASE("constant predictor has zero jacobian (quadrature)") {
    auto g1 = gaussian_location(1, 1.0);
    Predictor c;
    c.k = 1;
    c.p = [](const Observation&) { return vec1(3.25); };
    ExpectationResult j =
        psi_jacobian(*g1.model, vec1(0.5), c, IntegrationSpec::quadrature(128));
    CHECK(std::abs(j.value(0, 0)) <= 1e-10);
  }
  SUBCASE("bernoulli identity predictor, exact") {
    auto bern = bernoulli(1);
    Predictor id;
    id.k = 1;
    id.p = [](const Observation& x) { return x; };
    ExpectationResult j = psi_jacobian(*bern.model, vec1(0.5), id, IntegrationSpec::exact());
    CHECK(j.value(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("matches central finite differences of E_theta p") {
    auto g10 = gaussian_location(10, 1.0);
    IntegrationSpec spec = mc(50000, 21);
    ExpectationResult j = psi_jacobian(*g10.model, vec1(0.5), g10.predictor("mean"), spec);
    Matrix fd = psi_jacobian_fd(*g10.model, vec1(0.5), g10.predictor("mean"), spec);
    CHECK(std::abs(j.value(0, 0) - fd(0, 0)) <= std::max(1e-2, 3.0 * j.std_error(0, 0)));
  }
}

TEST_CASE("the two G forms agree where the proposition applies") {
  auto g1 = gaussian_location(1, 1.0);
  const Predictand& g = g1.predictand("theta_times_mean");
  const Predictor& p = g1.predictor("meansq_unbiased");
  for (double theta : {0.5, 1.0, 2.0}) {
    IntegrationSpec spec = mc(100000, 13);
    ExpectationResult general = G_general(*g1.model, vec1(theta), p, g, spec);
    ExpectationResult simplified = G_simplified(*g1.model, vec1(theta), g, spec);
    double tol = std::max(1e-2, 3.0 * (general.std_error(0, 0) + simplified.std_error(0, 0)));
    CHECK(std::abs(general.value(0, 0) - simplified.value(0, 0)) <= tol);
    CHECK(std::abs(simplified.value(0, 0) - theta) <= tol);
  }
}

TEST_CASE("G_simplified closed forms") {
  auto g1 = gaussian_location(1, 1.0);
  ExpectationResult gid =
      G_simplified(*g1.model, vec1(0.7), g1.predictand("theta"), IntegrationSpec::quadrature(64));
  CHECK(gid.value(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  ExpectationResult gtx = G_simplified(*g1.model, vec1(2.0), g1.predictand("theta_times_mean"),
                                       mc(100000, 15));
  CHECK(std::abs(gtx.value(0, 0) - 2.0) <= 3.0 * gtx.std_error(0, 0));

  // Degenerate case: centered AR(1) with g = theta x_n has G = E x_n = 0.
  auto ar = ar1_prediction(20);
  ExpectationResult gz =
      G_simplified(*ar.model, vec1(0.5), ar.predictand("cond_mean"), mc(100000, 16));
  CHECK(std::abs(gz.value(0, 0)) <= 3.0 * gz.std_error(0, 0));
}

TEST_CASE("unbiased bound closed forms") {
  auto g10 = gaussian_location(10, 1.0);
  Matrix b = cr_bound_unbiased(*g10.model, vec1(0.5), g10.predictand("theta"),
                               IntegrationSpec::quadrature(128));
  CHECK(b(0, 0) == doctest::Approx(0.1).epsilon(1e-7));

  auto bern = bernoulli(1);
  Matrix bb = cr_bound_unbiased(*bern.model, vec1(0.5), bern.predictand("theta"),
                                IntegrationSpec::exact());
  CHECK(bb(0, 0) == doctest::Approx(0.25).epsilon(1e-12));

  // Constant predictand: zero bound, reported as valid.
  Predictand constant;
  constant.k = 1;
  constant.g = [](const Observation&, const Vector&) { return vec1(4.0); };
  constant.jacobian = [](const Observation&, const Vector&) { return Matrix::Zero(1, 1); };
  Matrix bz = cr_bound_unbiased(*g10.model, vec1(0.5), constant, mc(1000, 2));
  CHECK(bz(0, 0) == 0.0);
}

TEST_CASE("biased bound") {
  auto g10 = gaussian_location(10, 1.0);
  const BiasedPredictand& rb = g10.biased_predictand("theta_bias_scaled_mean");

  SUBCASE("closed form 0.01 theta^2 + 0.081") {
    IntegrationSpec spec = IntegrationSpec::quadrature(128);
    Matrix b0 = cr_bound_biased(*g10.model, vec1(0.0), rb, spec);
    CHECK(b0(0, 0) == doctest::Approx(0.081).epsilon(1e-9));
    Matrix b1 = cr_bound_biased(*g10.model, vec1(1.0), rb, spec);
    CHECK(b1(0, 0) == doctest::Approx(0.091).epsilon(1e-9));
  }

  SUBCASE("zero bias reproduces the unbiased bound bit for bit") {
    BiasedPredictand unbiased;
    unbiased.r = g10.predictand("theta");
    unbiased.bias = [](const Vector&) { return vec1(0.0); };
    unbiased.bias_jacobian = [](const Vector&) { return Matrix::Zero(1, 1); };
    IntegrationSpec spec = IntegrationSpec::quadrature(128);
    Matrix via_biased = cr_bound_biased(*g10.model, vec1(0.5), unbiased, spec);
    Matrix direct = cr_bound_unbiased(*g10.model, vec1(0.5), g10.predictand("theta"), spec);
    CHECK(via_biased(0, 0) == direct(0, 0));
  }

  SUBCASE("estimated bias path approximates the analytic one") {
    const BiasedPredictand& est = g10.biased_predictand("theta_bias_estimated");
    Predictor p = g10.predictor("mean_scaled_0.9");
    IntegrationSpec spec = mc(100000, 23);
    Matrix b = cr_bound_biased(*g10.model, vec1(1.0), est, spec, &p);
    CHECK(std::abs(b(0, 0) - 0.091) <= 5e-3);
    CHECK_THROWS_AS(cr_bound_biased(*g10.model, vec1(1.0), est, spec, nullptr),
                    ConfigError);
  }
}

TEST_CASE("efficiency residual separates mean from median") {
  auto g10 = gaussian_location(10, 1.0);
  const Predictand& g = g10.predictand("theta");
  IntegrationSpec spec = mc(100000, 19);

  EfficiencyResidual mean_res =
      efficiency_residual(*g10.model, vec1(0.5), g10.predictor("mean"), g, spec);
  CHECK(mean_res.value <= 3.0 * mean_res.std_error + 1e-10);

  EfficiencyResidual offset_res =
      efficiency_residual(*g10.model, vec1(0.5), g10.predictor("mean_plus_0.5"), g, spec);
  CHECK(std::abs(offset_res.value - 0.25) <= 3.0 * offset_res.std_error + 1e-6);

  EfficiencyResidual med_res =
      efficiency_residual(*g10.model, vec1(0.5), g10.predictor("median"), g, spec);
  CHECK(med_res.value > 3.0 * med_res.std_error);
}

TEST_CASE("efficiency gap") {
  auto g10 = gaussian_location(10, 1.0);
  const Predictand& g = g10.predictand("theta");
  IntegrationSpec spec = mc(100000, 29);
  Matrix bound = cr_bound_unbiased(*g10.model, vec1(0.5), g, IntegrationSpec::quadrature(128));

  ExpectationResult q_mean = qep(*g10.model, vec1(0.5), g10.predictor("mean"), g, spec);
  EfficiencyGap gap_mean = efficiency_gap(symmetrized(q_mean.value), bound,
                                          3.0 * q_mean.std_error(0, 0) + 1e-8);
  CHECK(gap_mean.is_efficient);
  CHECK(std::abs(gap_mean.min_eigenvalue) <= 3.0 * q_mean.std_error(0, 0) + 1e-8);

  ExpectationResult q_med = qep(*g10.model, vec1(0.5), g10.predictor("median"), g, spec);
  EfficiencyGap gap_med = efficiency_gap(symmetrized(q_med.value), bound,
                                         3.0 * q_med.std_error(0, 0) + 1e-8);
  CHECK_FALSE(gap_med.is_efficient);
  CHECK(gap_med.min_eigenvalue > 3.0 * q_med.std_error(0, 0));

  EfficiencyGap trivial = efficiency_gap(bound, bound, 1e-15);
  CHECK(trivial.gap.cwiseAbs().maxCoeff() == 0.0);
  CHECK(trivial.is_efficient);
}

TEST_CASE("matrix CR inequality across catalog pairs") {
  struct Case {
    CatalogEntry entry;
    std::string predictand;
    std::string predictor;
  };
  std::vector<Case> cases;
  cases.push_back({gaussian_location(10, 1.0), "theta", "mean"});
  cases.push_back({gaussian_location(10, 1.0), "theta", "median"});
  cases.push_back({bernoulli(4), "theta", "mean"});
  cases.push_back({poisson(2), "theta", "mean"});
  for (const auto& c : cases) {
    for (const auto& theta : c.entry.default_theta_grid) {
      IntegrationSpec spec = mc(50000, 41);
      ExpectationResult q =
          qep(*c.entry.model, theta, c.entry.predictor(c.predictor),
              c.entry.predictand(c.predictand), spec);
      Matrix bound = cr_bound_unbiased(*c.entry.model, theta,
                                       c.entry.predictand(c.predictand), spec);
      double tol = std::max(1e-8, 3.0 * q.std_error.cwiseAbs().maxCoeff());
      CHECK(min_eigenvalue(symmetrized(q.value) - bound) >= -tol);
    }
  }
}

TEST_CASE("bound report picks the form the data supports") {
  auto g10 = gaussian_location(10, 1.0);
  const Predictand& g = g10.predictand("theta");
  IntegrationSpec spec = mc(100000, 31);

  BoundReport unbiased = bound_report(*g10.model, vec1(0.5), g10.predictor("mean"), g, spec);
  CHECK(unbiased.form == "simplified");
  CHECK(std::abs(unbiased.bound(0, 0) - 0.1) <= 1e-6);
  CHECK(unbiased.equality_residual <= 3.0 * unbiased.equality_residual_std_error + 1e-10);

  BoundReport biased =
      bound_report(*g10.model, vec1(1.0), g10.predictor("mean_scaled_0.9"), g, spec);
  CHECK(biased.form == "biased");
  CHECK(std::abs(biased.bound(0, 0) - 0.091) <= 5e-3);
}

TEST_CASE("assumption diagnostics") {
  auto g10 = gaussian_location(10, 1.0);
  std::vector<Vector> grid = {vec1(0.4), vec1(0.5), vec1(0.6)};

  SUBCASE("well-behaved predictor passes") {
    AssumptionReport rep =
        check_assumptions(*g10.model, vec1(0.5), grid, g10.predictor("mean"),
                          g10.predictand("theta"), mc(20000, 37));
    CHECK(rep.all_pass);
    REQUIRE(rep.items.size() == 4);
    CHECK(rep.items[0].pass);  // fisher invertible
    CHECK(rep.items[0].value < 1e3);
  }

  SUBCASE("divergent second moment is flagged") {
    auto g1 = gaussian_location(1, 1.0);
    std::vector<Vector> small_grid = {vec1(0.0), vec1(0.1)};
    AssumptionReport rep =
        check_assumptions(*g1.model, vec1(0.0), small_grid, g1.predictor("exp_growth"),
                          g1.predictand("theta"), IntegrationSpec::quadrature(128));
    CHECK_FALSE(rep.all_pass);
    bool p2_flagged = false;
    for (const auto& item : rep.items) {
      if (item.name == "sup_E_p_squared") p2_flagged = !item.pass;
    }
    CHECK(p2_flagged);
  }

  SUBCASE("empty grid is a precondition error") {
    CHECK_THROWS_AS(check_assumptions(*g10.model, vec1(0.5), {}, g10.predictor("mean"),
                                      g10.predictand("theta"), mc(1000, 1)),
                    ConfigError);
  }
}
