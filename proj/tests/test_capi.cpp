#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <crpred/crpred.h>

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <string>

using nlohmann::json;

namespace {

struct ModelHandle {
  crpred_model* m = nullptr;
  explicit ModelHandle(const char* id) { REQUIRE(crpred_model_open(id, &m) == CRPRED_OK); }
  ~ModelHandle() { crpred_model_close(m); }
};

}  // namespace

TEST_CASE("version string") {
  CHECK(std::strcmp(crpred_version(), CRPRED_VERSION) == 0);
}

TEST_CASE("open, query, close") {
  ModelHandle h("gaussian_location:n=10,sigma=1");
  CHECK(crpred_model_param_dim(h.m) == 1);
  CHECK(crpred_model_obs_dim(h.m) == 10);
}

TEST_CASE("unknown ids produce config errors with a message") {
  crpred_model* m = nullptr;
  CHECK(crpred_model_open("bogus_model", &m) == CRPRED_ERROR_CONFIG);
  CHECK(m == nullptr);
  CHECK(std::strlen(crpred_last_error()) > 0);
}

TEST_CASE("log density, score and likelihood ratio buffers") {
  ModelHandle h("gaussian_location:n=1,sigma=1");
  double x = 0.0, theta = 0.0, out = 0.0;
  REQUIRE(crpred_log_density(h.m, &x, &theta, &out) == CRPRED_OK);
  CHECK(out == doctest::Approx(std::log(1.0 / std::sqrt(2.0 * M_PI))).epsilon(1e-12));

  double theta1 = 1.0, ratio = 0.0;
  REQUIRE(crpred_likelihood_ratio(h.m, &theta, &theta1, &x, &ratio) == CRPRED_OK);
  CHECK(ratio == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

  double xs = 1.5, th = 0.5, s = 0.0;
  REQUIRE(crpred_score(h.m, &xs, &th, &s) == CRPRED_OK);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sampling is deterministic through the C boundary") {
  ModelHandle h("poisson:n=1");
  double theta = 2.0;
  double a[5], b[5];
  REQUIRE(crpred_sample(h.m, &theta, 5, 42, a) == CRPRED_OK);
  REQUIRE(crpred_sample(h.m, &theta, 5, 42, b) == CRPRED_OK);
  for (int i = 0; i < 5; ++i) CHECK(a[i] == b[i]);

  double bad_theta = 0.0;
  CHECK(crpred_sample(h.m, &bad_theta, 5, 42, a) == CRPRED_ERROR_DOMAIN);
}

TEST_CASE("fisher through the C boundary") {
  ModelHandle h("gaussian_location:n=10,sigma=1");
  double theta = 0.5, value = 0.0, se = 0.0;
  REQUIRE(crpred_fisher(h.m, &theta, "{\"mode\":\"quadrature\",\"nodes\":128}", 1, &value,
                        &se) == CRPRED_OK);
  CHECK(value == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(se == 0.0);

  ModelHandle b("bernoulli:n=1");
  double tb = 0.5, vb = 0.0;
  REQUIRE(crpred_fisher(b.m, &tb, nullptr, 1, &vb, nullptr) == CRPRED_OK);
  CHECK(vb == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("run commands end to end") {
  const char* cfg = R"({
    "model": "gaussian_location:n=10,sigma=1",
    "theta_grid": [[0.0],[0.5],[1.0]],
    "predictand": "theta",
    "predictor": "mean",
    "integration": {"mode": "monte_carlo", "mc_n": 20000},
    "seed": 5
  })";
  char* report = nullptr;
  char* csv = nullptr;
  REQUIRE(crpred_run("bound", cfg, nullptr, &report, &csv) == CRPRED_OK);
  REQUIRE(report != nullptr);
  json parsed = json::parse(report);
  CHECK(parsed["records"].size() == 3);
  CHECK(parsed["records"][0]["bound"]["data"][0].get<double>() ==
        doctest::Approx(0.1).epsilon(1e-6));
  CHECK(csv != nullptr);
  CHECK(std::strlen(csv) > 0);

  char* report2 = nullptr;
  REQUIRE(crpred_run("bound", cfg, nullptr, &report2, nullptr) == CRPRED_OK);
  CHECK(std::string(report) == report2);

  crpred_string_free(report);
  crpred_string_free(report2);
  crpred_string_free(csv);
}

TEST_CASE("seed override option") {
  const char* cfg = R"({
    "model": "gaussian_location:n=10,sigma=1",
    "theta_grid": [[0.5]],
    "predictand": "theta", "predictor": "mean",
    "integration": {"mode": "monte_carlo", "mc_n": 5000},
    "seed": 5
  })";
  crpred_run_options opts{};
  opts.has_seed_override = 1;
  opts.seed_override = 77;
  char* report = nullptr;
  REQUIRE(crpred_run("qep", cfg, &opts, &report, nullptr) == CRPRED_OK);
  json parsed = json::parse(report);
  CHECK(parsed["config"]["seed"] == 77);
  crpred_string_free(report);
}

TEST_CASE("error statuses") {
  char* report = nullptr;
  CHECK(crpred_run("bound", "{broken json", nullptr, &report, nullptr) ==
        CRPRED_ERROR_CONFIG);
  CHECK(report == nullptr);
  CHECK(crpred_run("no-such-command", "{}", nullptr, &report, nullptr) ==
        CRPRED_ERROR_CONFIG);

  // Assumption-violation verdicts still deliver the report.
  const char* cfg = R"({
    "model": "gaussian_location:n=1,sigma=1",
    "theta_grid": [[0.0]],
    "predictand": "theta", "predictor": "exp_growth",
    "neighborhood": {"center": [0.0], "radius": 0.1, "points_per_axis": 3},
    "integration": {"mode": "quadrature", "nodes": 96}
  })";
  CHECK(crpred_run("check-assumptions", cfg, nullptr, &report, nullptr) ==
        CRPRED_ERROR_ASSUMPTION);
  REQUIRE(report != nullptr);
  json parsed = json::parse(report);
  CHECK(parsed["records"][0]["all_pass"] == false);
  crpred_string_free(report);
}
