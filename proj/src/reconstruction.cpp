#include "reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace crpred {

namespace {

// G(theta_s) inverse via SVD; G is square (the characterization needs k = d)
// but not symmetric.
Matrix invert_G(const Matrix& G, double s_position) {
  Eigen::JacobiSVD<Matrix> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  double smax = svd.singularValues().maxCoeff();
  double smin = svd.singularValues().minCoeff();
  if (!(smin > 0.0) || smax / smin >= kConditionLimit) {
    std::ostringstream os;
    os << "G(theta_s) singular at path position s=" << s_position;
    throw SingularError(os.str(), smin > 0 ? smax / smin
                                           : std::numeric_limits<double>::infinity());
  }
  return svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() *
         svd.matrixU().transpose();
}

Matrix G_at(const DominatedModel& model, const Vector& theta, const Predictand& g,
            const IntegrationSpec& spec, const Predictor* general_form_p) {
  if (general_form_p) return G_general(model, theta, *general_form_p, g, spec).value;
  return G_simplified(model, theta, g, spec).value;
}

int legs_of(const ParameterPath& path) {
  return static_cast<int>(path.waypoints.size()) - 1;
}

// Per-leg Simpson interval count: multiple of 4 so the coarse (half) rule
// shares the same nodes.
int intervals_per_leg(const ParameterPath& path) {
  int legs = legs_of(path);
  int m = (path.steps + legs - 1) / legs;
  m = ((m + 3) / 4) * 4;
  return std::max(m, 4);
}

}  // namespace

ParameterPath ParameterPath::straight(const Vector& from, const Vector& to, int steps) {
  ParameterPath p;
  p.waypoints = {from, to};
  p.steps = steps;
  return p;
}

void ParameterPath::validate(const ParameterDomain& domain) const {
  if (waypoints.size() < 2) throw ConfigError("path needs at least two waypoints");
  if (steps < 4) throw ConfigError("path needs at least 4 Simpson intervals");
  for (const auto& w : waypoints) {
    if (!domain.holds(w)) throw DomainError("path waypoint outside the parameter domain");
  }
}

Vector ParameterPath::theta_at(double s) const {
  int legs = legs_of(*this);
  double scaled = std::clamp(s, 0.0, 1.0) * legs;
  int leg = std::min(static_cast<int>(scaled), legs - 1);
  double local = scaled - leg;
  return waypoints[leg] + local * (waypoints[leg + 1] - waypoints[leg]);
}

Vector ParameterPath::theta_dot_at(double s) const {
  int legs = legs_of(*this);
  double scaled = std::clamp(s, 0.0, 1.0) * legs;
  int leg = std::min(static_cast<int>(scaled), legs - 1);
  return static_cast<double>(legs) * (waypoints[leg + 1] - waypoints[leg]);
}

PathTable::PathTable(const DominatedModel& model, const ParameterPath& path,
                     const Predictand& g, const IntegrationSpec& spec,
                     const Predictor* general_form_p)
    : model_(&model), g_(g) {
  path.validate(model.domain);
  if (g.k != model.domain.dim) {
    throw ConfigError("reconstruction needs k = d (square G)");
  }
  const int legs = legs_of(path);
  const int m = intervals_per_leg(path);

  for (int leg = 0; leg < legs; ++leg) {
    const Vector& a = path.waypoints[leg];
    const Vector& b = path.waypoints[leg + 1];
    Vector dot = b - a;  // local parametrization of the leg on [0,1]
    double h = 1.0 / m;
    for (int j = 0; j <= m; ++j) {
      double local = j * h;
      Vector theta = a + local * dot;
      if (!model.domain.holds(theta)) {
        throw DomainError("path leaves the parameter domain between waypoints");
      }
      double global_s = (leg + local) / legs;
      Matrix I = fisher_information(model, theta, spec).value;
      Matrix Ginv = invert_G(G_at(model, theta, g, spec, general_form_p), global_s);
      Eigen::RowVectorXd row = dot.transpose() * I * Ginv;

      double wf = (h / 3.0) * ((j == 0 || j == m) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0));
      double wc = 0.0;
      if (j % 2 == 0) {
        int jj = j / 2;
        int mc = m / 2;
        wc = (2.0 * h / 3.0) * ((jj == 0 || jj == mc) ? 1.0 : (jj % 2 == 1 ? 4.0 : 2.0));
      }
      thetas_.push_back(theta);
      rows_.push_back(row);
      w_fine_.push_back(wf);
      w_coarse_.push_back(wc);
    }
  }

  const int k = g.k;
  Vector fine = Vector::Zero(k);
  Vector coarse = Vector::Zero(k);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    fine += w_fine_[i] * rows_[i].transpose();
    coarse += w_coarse_[i] * rows_[i].transpose();
  }
  a_fine_ = fine;
  a_error_ = (fine - coarse).cwiseAbs().maxCoeff() / 15.0;
}

double PathTable::B(const Observation& x) const {
  double fine = 0.0;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    fine += w_fine_[i] * rows_[i].dot(g_.g(x, thetas_[i]));
  }
  return fine;
}

double PathTable::b_error_estimate(const Observation& x) const {
  double fine = 0.0, coarse = 0.0;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    double v = rows_[i].dot(g_.g(x, thetas_[i]));
    fine += w_fine_[i] * v;
    coarse += w_coarse_[i] * v;
  }
  return std::abs(fine - coarse) / 15.0;
}

Eigen::RowVectorXd path_integrand(const DominatedModel& model, double s,
                                  const ParameterPath& path, const Predictand& g,
                                  const IntegrationSpec& spec,
                                  const Predictor* general_form_p) {
  path.validate(model.domain);
  Vector theta = path.theta_at(s);
  Vector dot = path.theta_dot_at(s);
  Matrix I = fisher_information(model, theta, spec).value;
  Matrix Ginv = invert_G(G_at(model, theta, g, spec, general_form_p), s);
  return dot.transpose() * I * Ginv;
}

ReconstructionResult reconstruct_A(const DominatedModel& model, const ParameterPath& path,
                                   const Predictand& g, const IntegrationSpec& spec,
                                   const Predictor* general_form_p) {
  PathTable table(model, path, g, spec, general_form_p);
  ReconstructionResult res;
  res.A = table.A();
  res.error_estimate = table.a_error_estimate();
  res.integrand_samples = table.integrand_samples();
  return res;
}

BValue reconstruct_B(const DominatedModel& model, const ParameterPath& path,
                     const Predictand& g, const Observation& x,
                     const IntegrationSpec& spec, const Predictor* general_form_p) {
  PathTable table(model, path, g, spec, general_form_p);
  return {table.B(x), table.b_error_estimate(x)};
}

PathIndependenceReport path_independence_check(const DominatedModel& model,
                                               const ParameterPath& path_a,
                                               const ParameterPath& path_b,
                                               const Predictand& g,
                                               const IntegrationSpec& spec,
                                               const Predictor* general_form_p) {
  if ((path_a.start() - path_b.start()).norm() > 0 ||
      (path_a.end() - path_b.end()).norm() > 0) {
    throw ConfigError("path_independence_check: paths must share endpoints");
  }
  PathTable ta(model, path_a, g, spec, general_form_p);
  PathTable tb(model, path_b, g, spec, general_form_p);
  PathIndependenceReport rep;
  rep.delta_A = (ta.A() - tb.A()).cwiseAbs().maxCoeff();

  // Gradient-theorem side condition: (J A)' must reproduce I G^{-1} on a
  // small grid along the first path.
  const Vector origin = path_a.start();
  const int d = model.domain.dim;
  double residual = 0.0;
  for (double s : {0.25, 0.5, 1.0}) {
    Vector theta = path_a.theta_at(s);
    Matrix I = fisher_information(model, theta, spec).value;
    Matrix field = I * invert_G(G_at(model, theta, g, spec, general_form_p), s);
    Matrix ja(d, d);
    for (int j = 0; j < d; ++j) {
      double h = 1e-3 * (1.0 + std::abs(theta[j]));
      Vector tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      PathTable plus(model, ParameterPath::straight(origin, tp, path_a.steps), g, spec,
                     general_form_p);
      PathTable minus(model, ParameterPath::straight(origin, tm, path_a.steps), g, spec,
                      general_form_p);
      ja.col(j) = (plus.A() - minus.A()) / (2.0 * h);
    }
    residual = std::max(residual, (ja.transpose() - field).cwiseAbs().maxCoeff());
  }
  rep.jacobian_condition_residual = residual;
  return rep;
}

namespace {

std::vector<Observation> ratio_test_points(const DominatedModel& model,
                                           const Vector& theta0, int n_points,
                                           std::uint64_t seed) {
  if (model.measure == MeasureKind::Counting && model.support) {
    return model.support(theta0);
  }
  if (model.sampler) return model.sampler(theta0, n_points, seed);
  if (model.quad_hint && model.obs_dim == 1) {
    auto hint = model.quad_hint(theta0);
    std::vector<Observation> pts;
    for (int i = 0; i < 21; ++i) {
      Observation x(1);
      x[0] = hint[0].first + hint[0].second * (-3.0 + 0.3 * i);
      pts.push_back(x);
    }
    return pts;
  }
  throw CapabilityError("validate_density_ratio: no way to draw test observations");
}

}  // namespace

DensityRatioReport validate_density_ratio(const DominatedModel& model,
                                          const Vector& theta0, const Vector& theta,
                                          const ParameterPath& path, const Predictor& p,
                                          const Predictand& g, const IntegrationSpec& spec,
                                          int n_sample_points, std::uint64_t seed,
                                          bool efficiency_declared) {
  model.require_theta(theta0);
  model.require_theta(theta);
  if ((path.start() - theta0).norm() > 0 || (path.end() - theta).norm() > 0) {
    throw ConfigError("validate_density_ratio: path endpoints must be theta0, theta");
  }
  PathTable table(model, path, g, spec);
  const Vector A = table.A();

  DensityRatioReport rep;
  rep.efficiency_declared = efficiency_declared;

  auto points = ratio_test_points(model, theta0, n_sample_points, seed);
  rep.points_checked = points.size();
  const double ninf = -std::numeric_limits<double>::infinity();
  double tmax = -std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    double l0 = model.log_density(x, theta0);
    if (l0 == ninf) continue;
    double l1 = model.log_density(x, theta);
    if (l1 == ninf) {
      throw AbsContinuityError("density ratio vanishes on the theta0 support");
    }
    double t = A.dot(p.p(x)) - table.B(x);
    tmax = std::max(tmax, t);
    rep.pointwise_max_abs_log_error =
        std::max(rep.pointwise_max_abs_log_error, std::abs((l1 - l0) - t));
  }

  // Shifted exponent keeps E exp(A'p - B) finite when the raw exponent is
  // large; exp(shift) rescales the estimate afterwards.
  double shift = (tmax > 600.0) ? tmax - 1.0 : 0.0;
  ScalarFn integrand = [&A, &table, &p, shift](const Observation& x) {
    return std::exp(A.dot(p.p(x)) - table.B(x) - shift);
  };
  ExpectationResult norm = expect_scalar(model, theta0, integrand, spec);
  rep.normalization = std::exp(shift) * norm.value(0, 0);
  rep.normalization_std_error = std::exp(shift) * norm.std_error(0, 0);
  return rep;
}

double gradient_condition_check(const DominatedModel& model, const Vector& theta0,
                                const Vector& theta, const Predictand& g,
                                const std::vector<Observation>& x_sample,
                                const IntegrationSpec& spec, int steps,
                                const Predictor* general_form_p) {
  model.require_theta(theta0);
  model.require_theta(theta);
  if (x_sample.empty()) throw ConfigError("gradient_condition_check: empty x sample");
  const int d = model.domain.dim;

  Matrix I = fisher_information(model, theta, spec).value;
  Matrix field = I * invert_G(G_at(model, theta, g, spec, general_form_p), 1.0);

  std::vector<PathTable> plus_tables, minus_tables;
  std::vector<double> hs(d);
  for (int j = 0; j < d; ++j) {
    hs[j] = 1e-3 * (1.0 + std::abs(theta[j]));
    Vector tp = theta, tm = theta;
    tp[j] += hs[j];
    tm[j] -= hs[j];
    plus_tables.emplace_back(model, ParameterPath::straight(theta0, tp, steps), g, spec,
                             general_form_p);
    minus_tables.emplace_back(model, ParameterPath::straight(theta0, tm, steps), g, spec,
                              general_form_p);
  }

  double residual = 0.0;
  for (const auto& x : x_sample) {
    Vector grad(d);
    for (int j = 0; j < d; ++j) {
      grad[j] = (plus_tables[j].B(x) - minus_tables[j].B(x)) / (2.0 * hs[j]);
    }
    Vector expected = field * g.g(x, theta);
    residual = std::max(residual, (grad - expected).cwiseAbs().maxCoeff());
  }
  return residual;
}

}  // namespace crpred
