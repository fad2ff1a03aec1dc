#include "catalog.hpp"

#include "expectation.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <sstream>

namespace crpred {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr long long kSupportCap = 2'000'000;
constexpr double kAxisTail = 1e-15;  // per-axis truncated mass for products

Vector scalar_vec(double v) {
  Vector x(1);
  x[0] = v;
  return x;
}

double mean_of(const Observation& x, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i];
  return s / n;
}

std::vector<Vector> grid1(std::initializer_list<double> values) {
  std::vector<Vector> g;
  for (double v : values) g.push_back(scalar_vec(v));
  return g;
}

// Cartesian product of one axis repeated n times, capped.
std::vector<Observation> product_support(const std::vector<double>& axis, int n) {
  double total = 1.0;
  for (int i = 0; i < n; ++i) {
    total *= static_cast<double>(axis.size());
    if (total > static_cast<double>(kSupportCap)) {
      throw CapabilityError("product support exceeds the enumeration cap");
    }
  }
  std::vector<Observation> points;
  points.reserve(static_cast<std::size_t>(total));
  Observation x(n);
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    for (int i = 0; i < n; ++i) x[i] = axis[idx[i]];
    points.push_back(x);
    int i = 0;
    while (i < n && ++idx[i] == axis.size()) {
      idx[i] = 0;
      ++i;
    }
    if (i == n) break;
  }
  return points;
}

double logit(double t) { return std::log(t / (1.0 - t)); }

}  // namespace

const Predictand& CatalogEntry::predictand(const std::string& name) const {
  auto it = predictands.find(name);
  if (it == predictands.end()) {
    throw ConfigError("catalog entry has no predictand '" + name + "'");
  }
  return it->second;
}

const Predictor& CatalogEntry::predictor(const std::string& name) const {
  auto it = predictors.find(name);
  if (it == predictors.end()) {
    throw ConfigError("catalog entry has no predictor '" + name + "'");
  }
  return it->second;
}

const BiasedPredictand& CatalogEntry::biased_predictand(const std::string& name) const {
  auto it = biased_predictands.find(name);
  if (it == biased_predictands.end()) {
    throw ConfigError("catalog entry has no biased predictand '" + name + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Gaussian location

namespace {

std::shared_ptr<const DominatedModel> gaussian_model(int n, double sigma) {
  auto m = std::make_shared<DominatedModel>();
  std::ostringstream name;
  name << "gaussian_location:n=" << n << ",sigma=" << sigma;
  m->name = name.str();
  m->domain.dim = 1;
  m->domain.contains = [](const Vector& t) { return std::isfinite(t[0]); };
  m->measure = MeasureKind::Lebesgue;
  m->obs_dim = n;
  const double inv_var = 1.0 / (sigma * sigma);
  m->log_density = [n, sigma, inv_var](const Observation& x, const Vector& t) {
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
      double d = x[i] - t[0];
      q += d * d;
    }
    return -0.5 * n * (kLog2Pi + 2.0 * std::log(sigma)) - 0.5 * q * inv_var;
  };
  m->analytic_score = [n, inv_var](const Observation& x, const Vector& t) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] - t[0];
    return scalar_vec(s * inv_var);
  };
  m->sampler = [n, sigma](const Vector& t, long long count, std::uint64_t seed) {
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      Observation x(n);
      for (int j = 0; j < n; ++j) x[j] = t[0] + sigma * rng.normal();
      out.push_back(std::move(x));
    }
    return out;
  };
  m->quad_hint = [n, sigma](const Vector& t) {
    return std::vector<std::pair<double, double>>(static_cast<std::size_t>(n),
                                                  {t[0], sigma});
  };
  if (n > 1) m->iid = IidStructure{gaussian_model(1, sigma), n};
  return m;
}

}  // namespace

CatalogEntry gaussian_location(int n, double sigma) {
  if (n < 1) throw ConfigError("gaussian_location: n must be >= 1");
  if (!(sigma > 0)) throw ConfigError("gaussian_location: sigma must be positive");
  CatalogEntry entry;
  entry.model = gaussian_model(n, sigma);

  Predictand theta;
  theta.k = 1;
  theta.g = [](const Observation&, const Vector& t) { return scalar_vec(t[0]); };
  theta.jacobian = [](const Observation&, const Vector&) {
    return Matrix::Identity(1, 1);
  };
  entry.predictands["theta"] = theta;
  // Predicting a future observation has the same conditional mean.
  entry.predictands["future_mean"] = theta;

  Predictand theta_times_mean;
  theta_times_mean.k = 1;
  theta_times_mean.g = [n](const Observation& x, const Vector& t) {
    return scalar_vec(t[0] * mean_of(x, n));
  };
  theta_times_mean.jacobian = [n](const Observation& x, const Vector&) {
    Matrix j(1, 1);
    j(0, 0) = mean_of(x, n);
    return j;
  };
  entry.predictands["theta_times_mean"] = theta_times_mean;

  Predictor mean;
  mean.k = 1;
  mean.p = [n](const Observation& x) { return scalar_vec(mean_of(x, n)); };
  entry.predictors["mean"] = mean;

  Predictor median;
  median.k = 1;
  median.p = [n](const Observation& x) {
    std::vector<double> v(x.data(), x.data() + n);
    std::sort(v.begin(), v.end());
    double med = (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return scalar_vec(med);
  };
  entry.predictors["median"] = median;

  Predictor scaled;
  scaled.k = 1;
  scaled.p = [n](const Observation& x) { return scalar_vec(0.9 * mean_of(x, n)); };
  entry.predictors["mean_scaled_0.9"] = scaled;

  Predictor offset;
  offset.k = 1;
  offset.p = [n](const Observation& x) { return scalar_vec(mean_of(x, n) + 0.5); };
  entry.predictors["mean_plus_0.5"] = offset;

  // Unbiased for theta * mean: E[mean^2] = theta^2 + sigma^2/n.
  Predictor meansq;
  meansq.k = 1;
  const double correction = sigma * sigma / n;
  meansq.p = [n, correction](const Observation& x) {
    double m = mean_of(x, n);
    return scalar_vec(m * m - correction);
  };
  entry.predictors["meansq_unbiased"] = meansq;

  // Stress predictor with divergent second moment under the n=1 model; used
  // by the assumption diagnostics.
  Predictor exp_growth;
  exp_growth.k = 1;
  exp_growth.p = [n](const Observation& x) {
    double m = mean_of(x, n);
    return scalar_vec(std::exp(0.25 * m * m * n));
  };
  entry.predictors["exp_growth"] = exp_growth;

  // r = theta predicted by 0.9 * mean gives bias -0.1 theta.
  BiasedPredictand biased;
  biased.r = theta;
  biased.bias = [](const Vector& t) { return scalar_vec(-0.1 * t[0]); };
  biased.bias_jacobian = [](const Vector&) {
    Matrix j(1, 1);
    j(0, 0) = -0.1;
    return j;
  };
  entry.biased_predictands["theta_bias_scaled_mean"] = biased;

  BiasedPredictand estimated = biased;
  estimated.bias = nullptr;
  estimated.bias_jacobian = nullptr;
  entry.biased_predictands["theta_bias_estimated"] = estimated;

  const double fisher = n / (sigma * sigma);
  entry.closed_forms.fisher = [fisher](const Vector&) {
    return Matrix::Constant(1, 1, fisher);
  };
  entry.closed_forms.unbiased_bound_theta = [fisher](const Vector&) {
    return Matrix::Constant(1, 1, 1.0 / fisher);
  };
  entry.closed_forms.natural_A = [fisher](const Vector& t, const Vector& t0) {
    return scalar_vec(fisher * (t[0] - t0[0]));
  };
  entry.default_theta_grid = grid1({0.0, 0.5, 1.0});
  return entry;
}

// ---------------------------------------------------------------------------
// Bernoulli

namespace {

std::shared_ptr<const DominatedModel> bernoulli_model(int n) {
  auto m = std::make_shared<DominatedModel>();
  m->name = "bernoulli:n=" + std::to_string(n);
  m->domain.dim = 1;
  m->domain.contains = [](const Vector& t) { return t[0] > 0.0 && t[0] < 1.0; };
  m->measure = MeasureKind::Counting;
  m->obs_dim = n;
  m->log_density = [n](const Observation& x, const Vector& t) {
    double lp = 0.0;
    for (int i = 0; i < n; ++i) {
      if (x[i] == 1.0) {
        lp += std::log(t[0]);
      } else if (x[i] == 0.0) {
        lp += std::log(1.0 - t[0]);
      } else {
        return kNegInf;
      }
    }
    return lp;
  };
  m->analytic_score = [n](const Observation& x, const Vector& t) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] / t[0] - (1.0 - x[i]) / (1.0 - t[0]);
    return scalar_vec(s);
  };
  m->sampler = [n](const Vector& t, long long count, std::uint64_t seed) {
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      Observation x(n);
      for (int j = 0; j < n; ++j) x[j] = rng.bernoulli(t[0]);
      out.push_back(std::move(x));
    }
    return out;
  };
  m->support = [n](const Vector&) { return product_support({0.0, 1.0}, n); };
  if (n > 1) m->iid = IidStructure{bernoulli_model(1), n};
  return m;
}

}  // namespace

CatalogEntry bernoulli(int n) {
  if (n < 1) throw ConfigError("bernoulli: n must be >= 1");
  CatalogEntry entry;
  entry.model = bernoulli_model(n);

  Predictand theta;
  theta.k = 1;
  theta.g = [](const Observation&, const Vector& t) { return scalar_vec(t[0]); };
  theta.jacobian = [](const Observation&, const Vector&) {
    return Matrix::Identity(1, 1);
  };
  entry.predictands["theta"] = theta;

  Predictor mean;
  mean.k = 1;
  mean.p = [n](const Observation& x) { return scalar_vec(mean_of(x, n)); };
  entry.predictors["mean"] = mean;

  entry.closed_forms.fisher = [n](const Vector& t) {
    return Matrix::Constant(1, 1, n / (t[0] * (1.0 - t[0])));
  };
  entry.closed_forms.unbiased_bound_theta = [n](const Vector& t) {
    return Matrix::Constant(1, 1, t[0] * (1.0 - t[0]) / n);
  };
  entry.closed_forms.natural_A = [n](const Vector& t, const Vector& t0) {
    return scalar_vec(n * (logit(t[0]) - logit(t0[0])));
  };
  entry.default_theta_grid = grid1({0.25, 0.5, 0.75});
  return entry;
}

// ---------------------------------------------------------------------------
// Poisson

namespace {

std::vector<double> poisson_axis(double mean) {
  // Truncate each axis below kAxisTail so product models stay within the
  // 1e-12 coverage budget.
  std::vector<double> axis;
  double p = std::exp(-mean);
  double cum = p;
  axis.push_back(0.0);
  int k = 0;
  while (cum < 1.0 - kAxisTail && k < 4000) {
    ++k;
    p *= mean / k;
    cum += p;
    axis.push_back(static_cast<double>(k));
  }
  return axis;
}

double log_factorial(double k) { return std::lgamma(k + 1.0); }

std::shared_ptr<const DominatedModel> poisson_model(int n) {
  auto m = std::make_shared<DominatedModel>();
  m->name = "poisson:n=" + std::to_string(n);
  m->domain.dim = 1;
  m->domain.contains = [](const Vector& t) { return t[0] > 0.0 && std::isfinite(t[0]); };
  m->measure = MeasureKind::Counting;
  m->obs_dim = n;
  m->log_density = [n](const Observation& x, const Vector& t) {
    double lp = 0.0;
    for (int i = 0; i < n; ++i) {
      if (x[i] < 0.0 || x[i] != std::floor(x[i])) return kNegInf;
      lp += x[i] * std::log(t[0]) - t[0] - log_factorial(x[i]);
    }
    return lp;
  };
  m->analytic_score = [n](const Observation& x, const Vector& t) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] / t[0] - 1.0;
    return scalar_vec(s);
  };
  m->sampler = [n](const Vector& t, long long count, std::uint64_t seed) {
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      Observation x(n);
      for (int j = 0; j < n; ++j) x[j] = static_cast<double>(rng.poisson(t[0]));
      out.push_back(std::move(x));
    }
    return out;
  };
  m->support = [n](const Vector& t) { return product_support(poisson_axis(t[0]), n); };
  if (n > 1) m->iid = IidStructure{poisson_model(1), n};
  return m;
}

}  // namespace

CatalogEntry poisson(int n) {
  if (n < 1) throw ConfigError("poisson: n must be >= 1");
  CatalogEntry entry;
  entry.model = poisson_model(n);

  Predictand theta;
  theta.k = 1;
  theta.g = [](const Observation&, const Vector& t) { return scalar_vec(t[0]); };
  theta.jacobian = [](const Observation&, const Vector&) {
    return Matrix::Identity(1, 1);
  };
  entry.predictands["theta"] = theta;

  Predictor mean;
  mean.k = 1;
  mean.p = [n](const Observation& x) { return scalar_vec(mean_of(x, n)); };
  entry.predictors["mean"] = mean;

  entry.closed_forms.fisher = [n](const Vector& t) {
    return Matrix::Constant(1, 1, n / t[0]);
  };
  entry.closed_forms.unbiased_bound_theta = [n](const Vector& t) {
    return Matrix::Constant(1, 1, t[0] / n);
  };
  entry.closed_forms.natural_A = [n](const Vector& t, const Vector& t0) {
    return scalar_vec(n * (std::log(t[0]) - std::log(t0[0])));
  };
  entry.default_theta_grid = grid1({1.0, 2.0, 3.0});
  return entry;
}

// ---------------------------------------------------------------------------
// AR(1) with the next value as prediction target

CatalogEntry ar1_prediction(int n) {
  if (n < 2) throw ConfigError("ar1_prediction: n must be >= 2");
  CatalogEntry entry;
  auto m = std::make_shared<DominatedModel>();
  m->name = "ar1:n=" + std::to_string(n);
  m->domain.dim = 1;
  m->domain.contains = [](const Vector& t) { return t[0] > -1.0 && t[0] < 1.0; };
  m->measure = MeasureKind::Lebesgue;
  m->obs_dim = n + 1;  // (x_1..x_n, y = x_{n+1})
  m->log_density = [n](const Observation& x, const Vector& t) {
    const double th = t[0];
    const double one_minus = 1.0 - th * th;
    double lp = -0.5 * (n + 1) * kLog2Pi + 0.5 * std::log(one_minus) -
                0.5 * x[0] * x[0] * one_minus;
    for (int i = 1; i <= n; ++i) {
      double e = x[i] - th * x[i - 1];
      lp -= 0.5 * e * e;
    }
    return lp;
  };
  m->analytic_score = [n](const Observation& x, const Vector& t) {
    const double th = t[0];
    double s = -th / (1.0 - th * th) + th * x[0] * x[0];
    for (int i = 1; i <= n; ++i) s += (x[i] - th * x[i - 1]) * x[i - 1];
    return scalar_vec(s);
  };
  m->sampler = [n](const Vector& t, long long count, std::uint64_t seed) {
    const double th = t[0];
    const double sd0 = 1.0 / std::sqrt(1.0 - th * th);
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      Observation x(n + 1);
      x[0] = sd0 * rng.normal();
      for (int j = 1; j <= n; ++j) x[j] = th * x[j - 1] + rng.normal();
      out.push_back(std::move(x));
    }
    return out;
  };
  entry.model = m;

  Predictand next;
  next.k = 1;
  next.g = [n](const Observation& x, const Vector&) { return scalar_vec(x[n]); };
  next.jacobian = [](const Observation&, const Vector&) { return Matrix::Zero(1, 1); };
  entry.predictands["next"] = next;

  Predictand cond_mean;
  cond_mean.k = 1;
  cond_mean.g = [n](const Observation& x, const Vector& t) {
    return scalar_vec(t[0] * x[n - 1]);
  };
  cond_mean.jacobian = [n](const Observation& x, const Vector&) {
    Matrix j(1, 1);
    j(0, 0) = x[n - 1];
    return j;
  };
  entry.predictands["cond_mean"] = cond_mean;

  // Plug-in forecast theta_hat * x_n using the observed stretch only.
  Predictor plugin;
  plugin.k = 1;
  plugin.p = [n](const Observation& x) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      num += x[i] * x[i + 1];
      den += x[i] * x[i];
    }
    double th_hat = (den > 1e-300) ? num / den : 0.0;
    return scalar_vec(th_hat * x[n - 1]);
  };
  entry.predictors["plugin_next"] = plugin;

  entry.closed_forms.stationary_variance = [](const Vector& t) {
    return 1.0 / (1.0 - t[0] * t[0]);
  };
  entry.closed_forms.incompressible = 1.0;  // innovation variance
  entry.default_theta_grid = grid1({0.3, 0.5, 0.7});
  return entry;
}

// ---------------------------------------------------------------------------
// Two-parameter Gaussian mean

CatalogEntry gaussian_mean2() {
  CatalogEntry entry;
  auto m = std::make_shared<DominatedModel>();
  m->name = "gaussian_mean2";
  m->domain.dim = 2;
  m->domain.contains = [](const Vector& t) {
    return std::isfinite(t[0]) && std::isfinite(t[1]);
  };
  m->measure = MeasureKind::Lebesgue;
  m->obs_dim = 2;
  m->log_density = [](const Observation& x, const Vector& t) {
    double d0 = x[0] - t[0], d1 = x[1] - t[1];
    return -kLog2Pi - 0.5 * (d0 * d0 + d1 * d1);
  };
  m->analytic_score = [](const Observation& x, const Vector& t) {
    Vector s(2);
    s << x[0] - t[0], x[1] - t[1];
    return s;
  };
  m->sampler = [](const Vector& t, long long count, std::uint64_t seed) {
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      Observation x(2);
      x[0] = t[0] + rng.normal();
      x[1] = t[1] + rng.normal();
      out.push_back(std::move(x));
    }
    return out;
  };
  m->quad_hint = [](const Vector& t) {
    return std::vector<std::pair<double, double>>{{t[0], 1.0}, {t[1], 1.0}};
  };
  entry.model = m;

  Predictand theta;
  theta.k = 2;
  theta.g = [](const Observation&, const Vector& t) { return t; };
  theta.jacobian = [](const Observation&, const Vector&) {
    return Matrix::Identity(2, 2);
  };
  entry.predictands["theta"] = theta;

  Predictor identity;
  identity.k = 2;
  identity.p = [](const Observation& x) { return x; };
  entry.predictors["x"] = identity;

  entry.closed_forms.fisher = [](const Vector&) { return Matrix::Identity(2, 2); };
  entry.closed_forms.unbiased_bound_theta = [](const Vector&) {
    return Matrix::Identity(2, 2);
  };
  entry.closed_forms.natural_A = [](const Vector& t, const Vector& t0) {
    return Vector(t - t0);
  };
  Vector a(2), b(2), c(2);
  a << 0.0, 0.0;
  b << 0.5, 0.5;
  c << 1.0, 1.0;
  entry.default_theta_grid = {a, b, c};
  return entry;
}

// ---------------------------------------------------------------------------
// Uniform(0, theta): the counterexample family

CatalogEntry uniform_scale() {
  CatalogEntry entry;
  auto m = std::make_shared<DominatedModel>();
  m->name = "uniform_scale";
  m->domain.dim = 1;
  m->domain.contains = [](const Vector& t) { return t[0] > 0.0 && std::isfinite(t[0]); };
  m->measure = MeasureKind::Lebesgue;
  m->obs_dim = 1;
  m->log_density = [](const Observation& x, const Vector& t) {
    if (x[0] <= 0.0 || x[0] >= t[0]) return kNegInf;
    return -std::log(t[0]);
  };
  m->analytic_score = [](const Observation&, const Vector& t) {
    return scalar_vec(-1.0 / t[0]);
  };
  m->sampler = [](const Vector& t, long long count, std::uint64_t seed) {
    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i));
      out.push_back(scalar_vec(t[0] * rng.uniform()));
    }
    return out;
  };
  // Box [0, theta] exactly: location theta/2, scale theta/20 at 10 sigma.
  m->quad_hint = [](const Vector& t) {
    return std::vector<std::pair<double, double>>{{0.5 * t[0], 0.05 * t[0]}};
  };
  entry.model = m;

  Predictand theta;
  theta.k = 1;
  theta.g = [](const Observation&, const Vector& t) { return scalar_vec(t[0]); };
  theta.jacobian = [](const Observation&, const Vector&) {
    return Matrix::Identity(1, 1);
  };
  entry.predictands["theta"] = theta;
  entry.default_theta_grid = grid1({1.0});
  return entry;
}

// ---------------------------------------------------------------------------
// Exponential-type family builder

CatalogEntry exponential_family_builder(
    const Predictor& p, std::function<Vector(const Vector&)> A,
    std::function<double(const Observation&, const Vector&)> B,
    std::shared_ptr<const DominatedModel> base, const Vector& base_theta,
    ParameterDomain domain, const std::vector<Vector>& check_grid,
    std::function<std::vector<std::pair<double, double>>(const Vector&)> quad_hint,
    double tol) {
  if (!base) throw ConfigError("exponential_family_builder: base model required");
  base->require_theta(base_theta);

  auto m = std::make_shared<DominatedModel>();
  m->name = "expfam(" + base->name + ")";
  m->domain = std::move(domain);
  m->measure = base->measure;
  m->obs_dim = base->obs_dim;
  auto base_model = base;
  auto pred = p.p;
  m->log_density = [base_model, base_theta, pred, A, B](const Observation& x,
                                                        const Vector& t) {
    double lb = base_model->log_density(x, base_theta);
    if (lb == kNegInf) return kNegInf;
    return lb + A(t).dot(pred(x)) - B(x, t);
  };
  if (quad_hint) {
    m->quad_hint = std::move(quad_hint);
  } else if (base->quad_hint) {
    auto hint = base->quad_hint;
    m->quad_hint = [hint, base_theta](const Vector&) { return hint(base_theta); };
  }
  if (base->support) {
    auto sup = base->support;
    m->support = [sup, base_theta](const Vector&) { return sup(base_theta); };
  }

  CatalogEntry entry;
  entry.model = m;

  // Normalization gate: exp(A'p - B) must integrate to 1 under the base at
  // every grid point.
  IntegrationSpec spec;
  for (const auto& t : check_grid) {
    m->require_theta(t);
    ExpectationResult mass =
        expect_scalar(*m, t, [](const Observation&) { return 1.0; }, spec);
    if (std::abs(mass.value(0, 0) - 1.0) > std::max(tol, 3.0 * mass.std_error(0, 0))) {
      throw ConfigError("exponential_family_builder: density mass " +
                        std::to_string(mass.value(0, 0)) + " at a grid point (not a "
                        "probability family)");
    }
  }

  entry.predictors["p"] = p;
  entry.default_theta_grid = check_grid;
  return entry;
}

CatalogEntry expfam_gauss() {
  auto base = gaussian_model(1, 1.0);
  Predictor p;
  p.k = 1;
  p.p = [](const Observation& x) { return x; };
  ParameterDomain dom;
  dom.dim = 1;
  dom.contains = [](const Vector& t) { return std::isfinite(t[0]); };
  auto A = [](const Vector& t) { return t; };
  auto B = [](const Observation&, const Vector& t) { return 0.5 * t[0] * t[0]; };
  auto hint = [](const Vector& t) {
    return std::vector<std::pair<double, double>>{{t[0], 1.0}};
  };
  CatalogEntry entry = exponential_family_builder(
      p, A, B, base, scalar_vec(0.0), dom, grid1({0.25, 0.5, 1.0}), hint);

  Predictand theta;
  theta.k = 1;
  theta.g = [](const Observation&, const Vector& t) { return scalar_vec(t[0]); };
  theta.jacobian = [](const Observation&, const Vector&) {
    return Matrix::Identity(1, 1);
  };
  entry.predictands["theta"] = theta;
  entry.predictors["x"] = entry.predictors["p"];
  entry.closed_forms.fisher = [](const Vector&) { return Matrix::Identity(1, 1); };
  entry.closed_forms.natural_A = [](const Vector& t, const Vector& t0) {
    return scalar_vec(t[0] - t0[0]);
  };
  return entry;
}

// ---------------------------------------------------------------------------
// Identifier parsing

namespace {

std::map<std::string, double> parse_params(const std::string& text) {
  std::map<std::string, double> params;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("catalog id: expected key=value, got '" + item + "'");
    }
    std::string key = item.substr(0, eq);
    std::string value = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      params[key] = v;
    } catch (const std::exception&) {
      throw ConfigError("catalog id: bad numeric value '" + value + "'");
    }
  }
  return params;
}

double take(std::map<std::string, double>& params, const std::string& key,
            double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  double v = it->second;
  params.erase(it);
  return v;
}

int take_int(std::map<std::string, double>& params, const std::string& key,
             int fallback) {
  double v = take(params, key, fallback);
  if (v != std::floor(v)) throw ConfigError("catalog id: '" + key + "' must be integer");
  return static_cast<int>(v);
}

}  // namespace

CatalogEntry make_catalog_entry(const std::string& id) {
  std::string name = id;
  std::string param_text;
  if (auto colon = id.find(':'); colon != std::string::npos) {
    name = id.substr(0, colon);
    param_text = id.substr(colon + 1);
  }
  auto params = parse_params(param_text);

  CatalogEntry entry;
  if (name == "gaussian_location") {
    int n = take_int(params, "n", 1);
    double sigma = take(params, "sigma", 1.0);
    entry = gaussian_location(n, sigma);
  } else if (name == "bernoulli") {
    entry = bernoulli(take_int(params, "n", 1));
  } else if (name == "poisson") {
    entry = poisson(take_int(params, "n", 1));
  } else if (name == "ar1") {
    entry = ar1_prediction(take_int(params, "n", 20));
  } else if (name == "gaussian_mean2") {
    entry = gaussian_mean2();
  } else if (name == "uniform_scale") {
    entry = uniform_scale();
  } else if (name == "expfam_gauss") {
    entry = expfam_gauss();
  } else {
    throw ConfigError("unknown catalog model '" + name + "'");
  }
  if (!params.empty()) {
    throw ConfigError("catalog id: unknown parameter '" + params.begin()->first +
                      "' for model '" + name + "'");
  }
  return entry;
}

std::vector<std::string> catalog_ids() {
  return {"gaussian_location", "bernoulli", "poisson",      "ar1",
          "gaussian_mean2",    "uniform_scale", "expfam_gauss"};
}

}  // namespace crpred
