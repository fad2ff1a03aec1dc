#include "bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crpred {

namespace {

constexpr double kJacobianStep = 1e-5;  // matches the score differencing step

Matrix fd_predictand_jacobian(const Predictand& g, const Observation& x,
                              const Vector& theta, const ParameterDomain& domain) {
  const int d = static_cast<int>(theta.size());
  Matrix jac(g.k, d);
  for (int i = 0; i < d; ++i) {
    double h = kJacobianStep * (1.0 + std::abs(theta[i]));
    Vector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    if (!domain.holds(tp) || !domain.holds(tm)) {
      throw DomainError("predictand jacobian: theta +/- step leaves the domain");
    }
    jac.col(i) = (g.g(x, tp) - g.g(x, tm)) / (2.0 * h);
  }
  return jac;
}

ExpectationResult expect_vector(const DominatedModel& model, const Vector& theta,
                                const std::function<Vector(const Observation&)>& fn,
                                const IntegrationSpec& spec) {
  return expect(model, theta,
                [&fn](const Observation& x) -> Matrix { return fn(x); }, spec);
}

}  // namespace

Matrix Predictand::jacobian_at(const Observation& x, const Vector& theta,
                               const ParameterDomain& domain) const {
  if (jacobian) return jacobian(x, theta);
  return fd_predictand_jacobian(*this, x, theta, domain);
}

ExpectationResult qep(const DominatedModel& model, const Vector& theta,
                      const Predictor& p, const Predictand& g,
                      const IntegrationSpec& spec) {
  if (p.k != g.k) throw ConfigError("qep: predictor and predictand dimensions differ");
  MatrixFn integrand = [&p, &g, theta](const Observation& x) -> Matrix {
    Vector diff = p.p(x) - g.g(x, theta);
    return diff * diff.transpose();
  };
  return expect(model, theta, integrand, spec);
}

MsepDecomposition msep_decompose(const DominatedModel& joint_model, const Vector& theta,
                                 const Predictor& p, const Predictand& g_xy,
                                 const Predictand& r, const IntegrationSpec& spec) {
  if (g_xy.k != r.k || p.k != g_xy.k) {
    throw ConfigError("msep_decompose: dimension mismatch between p, g and r");
  }
  MsepDecomposition out;
  out.total = qep(joint_model, theta, p, g_xy, spec);
  out.qep_term = qep(joint_model, theta, p, r, spec);
  MatrixFn inc = [&r, &g_xy, theta](const Observation& x) -> Matrix {
    Vector diff = r.g(x, theta) - g_xy.g(x, theta);
    return diff * diff.transpose();
  };
  out.incompressible = expect(joint_model, theta, inc, spec);

  Matrix resid = out.total.value - out.qep_term.value - out.incompressible.value;
  out.residual_norm = resid.cwiseAbs().maxCoeff();
  double se = 0.0;
  se += out.total.std_error.cwiseAbs().maxCoeff();
  se += out.qep_term.std_error.cwiseAbs().maxCoeff();
  se += out.incompressible.std_error.cwiseAbs().maxCoeff();
  out.residual_allowance = 3.0 * se + 1e-12;
  out.consistent = out.residual_norm <= out.residual_allowance;
  return out;
}

ExpectationResult psi_jacobian(const DominatedModel& model, const Vector& theta,
                               const Predictor& delta, const IntegrationSpec& spec) {
  MatrixFn integrand = [&model, &delta, theta](const Observation& x) -> Matrix {
    return delta.p(x) * score(model, theta, x).transpose();
  };
  return expect(model, theta, integrand, spec);
}

Matrix psi_jacobian_fd(const DominatedModel& model, const Vector& theta,
                       const Predictor& delta, const IntegrationSpec& spec,
                       double step) {
  const int d = model.domain.dim;
  Matrix jac(delta.k, d);
  for (int i = 0; i < d; ++i) {
    double h = step * (1.0 + std::abs(theta[i]));
    Vector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    if (!model.domain.holds(tp) || !model.domain.holds(tm)) {
      throw DomainError("psi_jacobian_fd: theta +/- step leaves the domain");
    }
    ExpectationResult ep = expect_vector(model, tp, delta.p, spec);
    ExpectationResult em = expect_vector(model, tm, delta.p, spec);
    jac.col(i) = (ep.value.col(0) - em.value.col(0)) / (2.0 * h);
  }
  return jac;
}

ExpectationResult G_general(const DominatedModel& model, const Vector& theta,
                            const Predictor& p, const Predictand& g,
                            const IntegrationSpec& spec) {
  // J psi - E[g score'] collapses to the single integrand (p - g) score';
  // with common samples this is the same estimate with tighter error bars.
  MatrixFn integrand = [&model, &p, &g, theta](const Observation& x) -> Matrix {
    return (p.p(x) - g.g(x, theta)) * score(model, theta, x).transpose();
  };
  return expect(model, theta, integrand, spec);
}

ExpectationResult G_simplified(const DominatedModel& model, const Vector& theta,
                               const Predictand& g, const IntegrationSpec& spec) {
  MatrixFn integrand = [&model, &g, theta](const Observation& x) -> Matrix {
    return g.jacobian_at(x, theta, model.domain);
  };
  return expect(model, theta, integrand, spec);
}

Matrix cr_bound_unbiased(const DominatedModel& model, const Vector& theta,
                         const Predictand& g, const IntegrationSpec& spec) {
  Matrix G = G_simplified(model, theta, g, spec).value;
  Matrix I = fisher_information(model, theta, spec).value;
  Matrix inv = symmetric_inverse(I);
  return symmetrized(G * inv * G.transpose());
}

Matrix cr_bound_biased(const DominatedModel& model, const Vector& theta,
                       const BiasedPredictand& rb, const IntegrationSpec& spec,
                       const Predictor* p_for_bias) {
  const int d = model.domain.dim;
  std::function<Vector(const Vector&)> bias = rb.bias;
  if (!bias) {
    if (!p_for_bias) {
      throw ConfigError(
          "cr_bound_biased: bias not supplied and no predictor given to estimate it");
    }
    Predictor p = *p_for_bias;
    Predictand r = rb.r;
    bias = [&model, p, r, spec](const Vector& th) -> Vector {
      ExpectationResult ep = expect_vector(model, th, p.p, spec);
      ExpectationResult er = expect_vector(
          model, th, [&r, th](const Observation& x) { return r.g(x, th); }, spec);
      return ep.value.col(0) - er.value.col(0);
    };
  }
  Vector b = bias(theta);

  Matrix jb(rb.r.k, d);
  if (rb.bias_jacobian) {
    jb = rb.bias_jacobian(theta);
  } else {
    // Documented accuracy penalty: bias Jacobian by central differences.
    for (int i = 0; i < d; ++i) {
      double h = 1e-3 * (1.0 + std::abs(theta[i]));
      Vector tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      if (!model.domain.holds(tp) || !model.domain.holds(tm)) {
        throw DomainError("cr_bound_biased: theta +/- step leaves the domain");
      }
      jb.col(i) = (bias(tp) - bias(tm)) / (2.0 * h);
    }
  }

  Matrix G = G_simplified(model, theta, rb.r, spec).value + jb;
  Matrix I = fisher_information(model, theta, spec).value;
  Matrix inv = symmetric_inverse(I);
  return symmetrized(b * b.transpose() + G * inv * G.transpose());
}

bool unbiasedness_holds(const DominatedModel& model, const Vector& theta,
                        const Predictor& p, const Predictand& g,
                        const IntegrationSpec& spec) {
  ExpectationResult ep = expect_vector(model, theta, p.p, spec);
  ExpectationResult eg = expect_vector(
      model, theta, [&g, theta](const Observation& x) { return g.g(x, theta); }, spec);
  double diff = (ep.value - eg.value).cwiseAbs().maxCoeff();
  double sigma = ep.std_error.cwiseAbs().maxCoeff() + eg.std_error.cwiseAbs().maxCoeff();
  return diff <= std::max(1e-3, 3.0 * sigma);
}

EfficiencyResidual efficiency_residual(const DominatedModel& model, const Vector& theta,
                                       const Predictor& p, const Predictand& g,
                                       const IntegrationSpec& spec) {
  const bool unbiased = unbiasedness_holds(model, theta, p, g, spec);
  Matrix G = unbiased ? G_simplified(model, theta, g, spec).value
                      : G_general(model, theta, p, g, spec).value;
  Matrix I = fisher_information(model, theta, spec).value;
  Matrix K = G * symmetric_inverse(I);  // k x d
  ScalarFn integrand = [&model, &p, &g, K, theta](const Observation& x) {
    Vector resid = p.p(x) - g.g(x, theta) - K * score(model, theta, x);
    return resid.squaredNorm();
  };
  ExpectationResult r = expect_scalar(model, theta, integrand, spec);
  EfficiencyResidual out;
  out.value = std::max(0.0, r.value(0, 0));
  out.std_error = r.std_error(0, 0);
  out.form = unbiased ? "simplified" : "general";
  return out;
}

EfficiencyGap efficiency_gap(const Matrix& qep_value, const Matrix& bound, double tol) {
  if (qep_value.rows() != bound.rows() || qep_value.cols() != bound.cols()) {
    throw ConfigError("efficiency_gap: dimension mismatch between QEP and bound");
  }
  EfficiencyGap gap;
  gap.gap = qep_value - bound;
  gap.min_eigenvalue = min_eigenvalue(gap.gap);
  // Efficiency needs the whole gap matrix near zero, not just its smallest
  // eigenvalue.
  gap.is_efficient = gap.gap.cwiseAbs().maxCoeff() <= tol;
  return gap;
}

BoundReport bound_report(const DominatedModel& model, const Vector& theta,
                         const Predictor& p, const Predictand& g,
                         const IntegrationSpec& spec) {
  BoundReport rep;
  ExpectationResult q = qep(model, theta, p, g, spec);
  rep.qep = symmetrized(q.value);
  rep.qep_std_error = q.std_error;

  FisherResult I = fisher_information(model, theta, spec);
  rep.I_used = I.value;

  const bool unbiased = unbiasedness_holds(model, theta, p, g, spec);
  if (unbiased) {
    Matrix G = G_simplified(model, theta, g, spec).value;
    rep.G_used = G;
    rep.bound = symmetrized(G * symmetric_inverse(I.value) * G.transpose());
    rep.form = "simplified";
  } else {
    BiasedPredictand rb;
    rb.r = g;
    rep.bias_used = Vector();
    Matrix bound = cr_bound_biased(model, theta, rb, spec, &p);
    ExpectationResult ep = expect_vector(model, theta, p.p, spec);
    ExpectationResult eg = expect_vector(
        model, theta, [&g, theta](const Observation& x) { return g.g(x, theta); }, spec);
    rep.bias_used = ep.value.col(0) - eg.value.col(0);
    rep.G_used = G_general(model, theta, p, g, spec).value;
    rep.bound = bound;
    rep.form = "biased";
  }

  rep.gap = rep.qep - rep.bound;
  rep.gap_min_eigenvalue = min_eigenvalue(rep.gap);

  EfficiencyResidual er = efficiency_residual(model, theta, p, g, spec);
  rep.equality_residual = er.value;
  rep.equality_residual_std_error = er.std_error;
  return rep;
}

namespace {

struct MomentProbe {
  double value = 0.0;
  double std_error = 0.0;
  bool finite = true;
  std::string note;
};

// Scalar moment with divergence detection: quadrature results must be
// stable under doubling the box, Monte Carlo results must have controlled
// relative error, exact sums must cover the truncated support.
MomentProbe probe_moment(const DominatedModel& model, const Vector& theta,
                         const ScalarFn& fn, const IntegrationSpec& spec) {
  MomentProbe probe;
  try {
    ExpectationResult r = expect_scalar(model, theta, fn, spec);
    probe.value = r.value(0, 0);
    probe.std_error = r.std_error(0, 0);
    if (!std::isfinite(probe.value)) {
      probe.finite = false;
      probe.note = "non-finite estimate";
      return probe;
    }
    if (r.mode_used == "quadrature") {
      IntegrationSpec wide = spec;
      wide.box_sigmas = 2.0 * spec.box_sigmas;
      ExpectationResult rw = expect_scalar(model, theta, fn, wide);
      double denom = std::max(1.0, std::abs(probe.value));
      if (std::abs(rw.value(0, 0) - probe.value) / denom > 0.02) {
        probe.finite = false;
        probe.note = "integral not stable under box doubling (divergence suspected)";
        probe.value = std::max(probe.value, rw.value(0, 0));
      }
    } else if (r.mode_used == "monte_carlo" && probe.std_error > 0.5 * std::abs(probe.value)) {
      probe.finite = false;
      probe.note = "relative Monte Carlo error above 50% (heavy tail suspected)";
    }
  } catch (const Error& e) {
    probe.finite = false;
    probe.note = e.what();
  }
  return probe;
}

}  // namespace

AssumptionReport check_assumptions(const DominatedModel& model, const Vector& theta0,
                                   const std::vector<Vector>& neighborhood,
                                   const Predictor& p, const Predictand& g,
                                   const IntegrationSpec& spec) {
  model.require_theta(theta0);
  if (neighborhood.empty()) {
    throw ConfigError("check_assumptions: empty neighborhood grid");
  }
  for (const auto& th : neighborhood) model.require_theta(th);

  AssumptionReport rep;
  rep.grid_size = neighborhood.size();

  {
    AssumptionItem item;
    item.name = "fisher_invertible";
    try {
      FisherResult I = fisher_information(model, theta0, spec);
      item.value = symmetric_condition(I.value);
      item.pass = item.value < kConditionLimit;
      if (!item.pass) item.note = "condition number at or above 1e12";
    } catch (const Error& e) {
      item.pass = false;
      item.note = e.what();
      item.value = std::numeric_limits<double>::infinity();
    }
    rep.items.push_back(item);
  }

  {
    AssumptionItem item;
    item.name = "sup_E_p_squared";
    item.pass = true;
    for (const auto& th : neighborhood) {
      MomentProbe probe = probe_moment(
          model, th, [&p](const Observation& x) { return p.p(x).squaredNorm(); }, spec);
      item.value = std::max(item.value, probe.value);
      if (!probe.finite) {
        item.pass = false;
        item.note = probe.note;
      }
    }
    rep.items.push_back(item);
  }

  {
    AssumptionItem item;
    item.name = "sup_E_jacobian_g_squared";
    item.pass = true;
    for (const auto& th : neighborhood) {
      for (const auto& th_prime : neighborhood) {
        MomentProbe probe = probe_moment(
            model, th,
            [&g, &model, th_prime](const Observation& x) {
              return g.jacobian_at(x, th_prime, model.domain).squaredNorm();
            },
            spec);
        item.value = std::max(item.value, probe.value);
        if (!probe.finite) {
          item.pass = false;
          item.note = probe.note;
        }
      }
    }
    rep.items.push_back(item);
  }

  {
    AssumptionItem item;
    item.name = "sup_E_likelihood_ratio_squared";
    item.pass = true;
    for (const auto& th : neighborhood) {
      for (const auto& th_prime : neighborhood) {
        MomentProbe probe = probe_moment(
            model, th,
            [&model, th, th_prime](const Observation& x) {
              double r = likelihood_ratio(model, th, th_prime, x);
              if (std::isinf(r)) {
                throw AbsContinuityError("infinite likelihood ratio on the grid");
              }
              return r * r;
            },
            spec);
        item.value = std::max(item.value, probe.value);
        if (!probe.finite) {
          item.pass = false;
          item.note = probe.note;
        }
      }
    }
    rep.items.push_back(item);
  }

  rep.all_pass = true;
  for (const auto& item : rep.items) rep.all_pass = rep.all_pass && item.pass;
  return rep;
}

}  // namespace crpred
