#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "covariance.hpp"
#include "rng.hpp"

#include <cmath>

using namespace crpred;

namespace {

Vector vec1(double v) {
  Vector x(1);
  x[0] = v;
  return x;
}

DiscreteJoint three_point_joint() {
  // (t, s) in {(1,1), (2,-1), (0,2)} with probs (0.2, 0.3, 0.5)
  DiscreteJoint j;
  j.t = {vec1(1.0), vec1(2.0), vec1(0.0)};
  j.s = {vec1(1.0), vec1(-1.0), vec1(2.0)};
  j.prob = {0.2, 0.3, 0.5};
  return j;
}

}  // namespace

TEST_CASE("T = S attains equality") {
  DiscreteJoint j;
  j.t = {vec1(1.0), vec1(-0.5), vec1(2.0)};
  j.s = j.t;
  j.prob = {0.25, 0.5, 0.25};
  CovarianceReport rep = covariance_bound(j);
  CHECK(rep.residual.cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(rep.equality_residual <= 1e-14);
  CHECK(equality_condition_holds(j, 1e-12));
}

TEST_CASE("three-point joint against hand enumeration") {
  DiscreteJoint j = three_point_joint();
  // Oracle by direct summation: E t^2, E ts, E s^2.
  double ett = 0.0, ets = 0.0, ess = 0.0;
  for (int i = 0; i < 3; ++i) {
    ett += j.prob[i] * j.t[i][0] * j.t[i][0];
    ets += j.prob[i] * j.t[i][0] * j.s[i][0];
    ess += j.prob[i] * j.s[i][0] * j.s[i][0];
  }
  CovarianceReport rep = covariance_bound(j);
  CHECK(rep.lhs(0, 0) == doctest::Approx(ett).epsilon(1e-14));
  CHECK(rep.rhs(0, 0) == doctest::Approx(ets * ets / ess).epsilon(1e-12));
  CHECK(rep.min_eigenvalue >= -1e-12);
  // Z = T - (E TS)(E SS)^{-1} S summed by hand.
  double ez2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    double z = j.t[i][0] - ets / ess * j.s[i][0];
    ez2 += j.prob[i] * z * z;
  }
  CHECK(rep.equality_residual == doctest::Approx(ez2).epsilon(1e-12));
  CHECK(rep.equality_residual == doctest::Approx(rep.residual.trace()).epsilon(1e-12));
}

TEST_CASE("linear-plus-noise construction leaves exactly the noise moment") {
  // S in {-1, 1}, W in {-1, 1} independent, T = M S + W on 4 points.
  const double M = 1.7;
  DiscreteJoint j;
  for (double s : {-1.0, 1.0}) {
    for (double w : {-1.0, 1.0}) {
      j.s.push_back(vec1(s));
      j.t.push_back(vec1(M * s + w));
      j.prob.push_back(0.25);
    }
  }
  CovarianceReport rep = covariance_bound(j);
  double ew2 = 1.0;  // E W^2 by construction
  CHECK(rep.residual(0, 0) == doctest::Approx(ew2).epsilon(1e-12));
  CHECK_FALSE(equality_condition_holds(j, 1e-6));

  // Scaling the noise by 0.1 scales the equality residual by 0.01.
  DiscreteJoint j2;
  for (double s : {-1.0, 1.0}) {
    for (double w : {-1.0, 1.0}) {
      j2.s.push_back(vec1(s));
      j2.t.push_back(vec1(M * s + 0.1 * w));
      j2.prob.push_back(0.25);
    }
  }
  CHECK(covariance_bound(j2).equality_residual == doctest::Approx(0.01).epsilon(1e-10));
}

TEST_CASE("T = 0 holds with equality") {
  DiscreteJoint j;
  j.t = {vec1(0.0), vec1(0.0)};
  j.s = {vec1(1.0), vec1(-1.0)};
  j.prob = {0.5, 0.5};
  CHECK(equality_condition_holds(j, 1e-15));
}

TEST_CASE("projection fixes the span of S and kills its orthogonal complement") {
  DiscreteJoint j = three_point_joint();
  // U = s (a component of S): P_S(U) = U.
  std::vector<double> u(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) u[i] = j.s[i][0];
  auto proj = project_onto_scores(j, u);
  for (std::size_t i = 0; i < j.size(); ++i) {
    CHECK(proj[i] == doctest::Approx(u[i]).epsilon(1e-12));
  }

  // U orthogonal to S: E U s = 0 implies projection 0.
  // Build it by subtracting the projection from an arbitrary U.
  std::vector<double> v = {1.0, -2.0, 0.7};
  auto pv = project_onto_scores(j, v);
  std::vector<double> orth(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) orth[i] = v[i] - pv[i];
  auto porth = project_onto_scores(j, orth);
  for (std::size_t i = 0; i < j.size(); ++i) CHECK(std::abs(porth[i]) <= 1e-12);
}

TEST_CASE("projection is self-adjoint on a random five-point joint") {
  DiscreteJoint j = random_joint(424242, 1, 2, 5);
  CounterRng rng(5, 0);
  std::vector<double> u(j.size()), v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    u[i] = -1.0 + 2.0 * rng.uniform();
    v[i] = -1.0 + 2.0 * rng.uniform();
  }
  auto pu = project_onto_scores(j, u);
  auto pv = project_onto_scores(j, v);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    lhs += j.prob[i] * pu[i] * v[i];
    rhs += j.prob[i] * u[i] * pv[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("randomized suite: PSD residual and trace identity") {
  double min_eig = 1.0;
  double max_gap = 0.0;
  for (int i = 0; i < 1000; ++i) {
    DiscreteJoint j = random_joint(1000 + static_cast<std::uint64_t>(i));
    CovarianceReport rep = covariance_bound(j);
    min_eig = std::min(min_eig, rep.min_eigenvalue);
    max_gap = std::max(max_gap, std::abs(rep.equality_residual - rep.residual.trace()));
  }
  CHECK(min_eig >= -1e-10);
  CHECK(max_gap <= 1e-10);
}

TEST_CASE("randomized suite: idempotence, Bessel, span stability") {
  for (int i = 0; i < 200; ++i) {
    DiscreteJoint j = random_joint(77000 + static_cast<std::uint64_t>(i));
    CounterRng rng(31, static_cast<std::uint64_t>(i));
    std::vector<double> u(j.size());
    for (std::size_t p = 0; p < j.size(); ++p) u[p] = -2.0 + 4.0 * rng.uniform();

    auto pu = project_onto_scores(j, u);
    auto ppu = project_onto_scores(j, pu);
    double idem = 0.0;
    for (std::size_t p = 0; p < j.size(); ++p) {
      idem = std::max(idem, std::abs(ppu[p] - pu[p]));
    }
    CHECK(idem <= 1e-10);

    double eu2 = 0.0, epu2 = 0.0;
    for (std::size_t p = 0; p < j.size(); ++p) {
      eu2 += j.prob[p] * u[p] * u[p];
      epu2 += j.prob[p] * pu[p] * pu[p];
    }
    CHECK(eu2 >= epu2 - 1e-12);

    for (int comp = 0; comp < j.d(); ++comp) {
      std::vector<double> sc(j.size());
      for (std::size_t p = 0; p < j.size(); ++p) sc[p] = j.s[p][comp];
      auto psc = project_onto_scores(j, sc);
      for (std::size_t p = 0; p < j.size(); ++p) {
        CHECK(std::abs(psc[p] - sc[p]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("singular second moment is rejected with its condition number") {
  DiscreteJoint j;
  Vector s(2);
  s << 1.0, 1.0;  // rank-one E SS'
  j.s = {s, s};
  j.t = {vec1(1.0), vec1(-1.0)};
  j.prob = {0.5, 0.5};
  CHECK_THROWS_AS(covariance_bound(j), SingularError);
  try {
    covariance_bound(j);
  } catch (const SingularError& e) {
    CHECK(e.condition_number >= kConditionLimit);
  }
}

TEST_CASE("joint validation") {
  DiscreteJoint j;
  j.t = {vec1(1.0)};
  j.s = {vec1(1.0)};
  j.prob = {0.5};  // does not sum to one
  CHECK_THROWS_AS(covariance_bound(j), ConfigError);
}
