#include "expectation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>

namespace crpred {

namespace {

constexpr int kPanelOrder = 16;
constexpr int kMaxQuadDim = 4;
constexpr long long kMaxQuadPoints = 20'000'000;
constexpr long long kMaxSupportPoints = 2'000'000;
constexpr double kCoverageTol = 1e-11;

int default_nodes_for_dim(int dim) {
  switch (dim) {
    case 1: return 128;
    case 2: return 96;
    case 3: return 32;
    default: return 20;
  }
}

struct Axis {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Composite Gauss-Legendre rule over [a, b] with ceil(n/16) panels of 16.
Axis composite_axis(double a, double b, int n_nodes) {
  static thread_local std::vector<double> base_x, base_w;
  if (base_x.empty()) legendre_rule(kPanelOrder, base_x, base_w);

  int panels = std::max(1, (n_nodes + kPanelOrder - 1) / kPanelOrder);
  Axis axis;
  axis.nodes.reserve(static_cast<std::size_t>(panels) * kPanelOrder);
  axis.weights.reserve(static_cast<std::size_t>(panels) * kPanelOrder);
  double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * width;
    double mid = lo + 0.5 * width;
    double half = 0.5 * width;
    for (int i = 0; i < kPanelOrder; ++i) {
      axis.nodes.push_back(mid + half * base_x[i]);
      axis.weights.push_back(half * base_w[i]);
    }
  }
  return axis;
}

std::vector<std::pair<double, double>> quadrature_box(const DominatedModel& model,
                                                      const Vector& theta,
                                                      const IntegrationSpec& spec) {
  if (spec.quad_box) {
    if (static_cast<int>(spec.quad_box->size()) != model.obs_dim) {
      throw ConfigError("quadrature box dimension does not match the model");
    }
    return *spec.quad_box;
  }
  if (!model.quad_hint) {
    throw CapabilityError("model '" + model.name + "' provides no quadrature hints");
  }
  auto hints = model.quad_hint(theta);
  if (static_cast<int>(hints.size()) != model.obs_dim) {
    throw EvaluationError("model '" + model.name + "': bad quadrature hint size");
  }
  std::vector<std::pair<double, double>> box;
  box.reserve(hints.size());
  for (auto& [loc, scale] : hints) {
    box.emplace_back(loc - spec.box_sigmas * scale, loc + spec.box_sigmas * scale);
  }
  return box;
}

struct Accumulator {
  Matrix sum;
  bool started = false;
  void add(const Matrix& term) {
    if (!started) {
      sum = term;
      started = true;
    } else {
      sum += term;
    }
  }
};

void check_finite(const Matrix& h, const std::string& where) {
  if (!h.allFinite()) {
    throw IntegrandError("non-finite integrand value at " + where);
  }
}

ExpectationResult run_quadrature(const DominatedModel& model, const Vector& theta,
                                 const MatrixFn& h, const IntegrationSpec& spec) {
  auto box = quadrature_box(model, theta, spec);
  int dim = model.obs_dim;
  int nodes = spec.quad_nodes > 0 ? spec.quad_nodes : default_nodes_for_dim(dim);

  std::vector<Axis> axes;
  long long total = 1;
  for (int a = 0; a < dim; ++a) {
    axes.push_back(composite_axis(box[a].first, box[a].second, nodes));
    total *= static_cast<long long>(axes[a].nodes.size());
    if (total > kMaxQuadPoints) {
      throw CapabilityError("quadrature grid too large; reduce nodes per axis");
    }
  }

  Accumulator acc;
  Observation x(dim);
  std::vector<std::size_t> idx(dim, 0);
  long long evaluated = 0;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      x[a] = axes[a].nodes[idx[a]];
      w *= axes[a].weights[idx[a]];
    }
    double lf = model.log_density(x, theta);
    if (lf > -std::numeric_limits<double>::infinity()) {
      double f = std::exp(lf);
      if (f > 0.0) {
        Matrix hx = h(x);
        check_finite(hx, "quadrature node of model '" + model.name + "'");
        acc.add((w * f) * hx);
        ++evaluated;
      }
    }
    int a = 0;
    while (a < dim && ++idx[a] == axes[a].nodes.size()) {
      idx[a] = 0;
      ++a;
    }
    if (a == dim) break;
  }
  if (!acc.started) {
    throw EvaluationError("quadrature: density vanishes on the whole box for model '" +
                          model.name + "'");
  }
  ExpectationResult res;
  res.value = acc.sum;
  res.std_error = Matrix::Zero(acc.sum.rows(), acc.sum.cols());
  res.n_effective = evaluated;
  res.mode_used = "quadrature";
  return res;
}

ExpectationResult run_exact(const DominatedModel& model, const Vector& theta,
                            const MatrixFn& h, const IntegrationSpec& spec) {
  (void)spec;
  if (!model.support) {
    throw CapabilityError("model '" + model.name + "' provides no support enumeration");
  }
  auto points = model.support(theta);
  if (points.empty()) {
    throw EvaluationError("model '" + model.name + "': empty support enumeration");
  }
  if (static_cast<long long>(points.size()) > kMaxSupportPoints) {
    throw CapabilityError("support enumeration too large for exact mode");
  }
  double mass = 0.0;
  Accumulator acc;
  for (const auto& x : points) {
    double lf = model.log_density(x, theta);
    if (lf == -std::numeric_limits<double>::infinity()) continue;
    double f = std::exp(lf);
    mass += f;
    Matrix hx = h(x);
    check_finite(hx, "support point of model '" + model.name + "'");
    acc.add(f * hx);
  }
  if (mass < 1.0 - kCoverageTol || mass > 1.0 + kCoverageTol) {
    throw CoverageError("exact mode: enumerated mass " + std::to_string(mass) +
                        " misses the 1e-12 truncation target for model '" + model.name +
                        "'");
  }
  if (!acc.started) {
    throw EvaluationError("exact mode: no positive-mass support point");
  }
  ExpectationResult res;
  res.value = acc.sum;
  res.std_error = Matrix::Zero(acc.sum.rows(), acc.sum.cols());
  res.n_effective = static_cast<long long>(points.size());
  res.mode_used = "exact_discrete";
  return res;
}

struct BlockSums {
  Matrix sum;
  Matrix sum_sq;
};

ExpectationResult run_monte_carlo(const DominatedModel& model, const Vector& theta,
                                  const MatrixFn& h, const IntegrationSpec& spec) {
  if (!model.sampler) {
    throw CapabilityError("model '" + model.name + "' has no sampler for Monte Carlo");
  }
  const long long n = spec.mc_n;
  auto obs = model.sampler(theta, n, spec.seed);

  Matrix first = h(obs.front());
  check_finite(first, "sample 0");
  const Eigen::Index rows = first.rows();
  const Eigen::Index cols = first.cols();

  constexpr long long kBlock = 4096;
  const long long n_blocks = (n + kBlock - 1) / kBlock;

  auto eval_block = [&](long long b) {
    BlockSums s{Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)};
    long long lo = b * kBlock;
    long long hi = std::min(n, lo + kBlock);
    for (long long i = lo; i < hi; ++i) {
      Matrix hx = h(obs[static_cast<std::size_t>(i)]);
      if (!hx.allFinite()) {
        throw IntegrandError("non-finite integrand at Monte Carlo sample " +
                             std::to_string(i));
      }
      s.sum += hx;
      s.sum_sq += hx.cwiseProduct(hx);
    }
    return s;
  };

  std::vector<BlockSums> blocks(static_cast<std::size_t>(n_blocks));
  int workers = std::max(1, spec.workers);
  if (workers == 1) {
    for (long long b = 0; b < n_blocks; ++b) blocks[static_cast<std::size_t>(b)] = eval_block(b);
  } else {
    std::vector<std::future<void>> futs;
    std::atomic<long long> next{0};
    for (int w = 0; w < workers; ++w) {
      futs.push_back(std::async(std::launch::async, [&]() {
        long long b;
        while ((b = next.fetch_add(1)) < n_blocks) {
          blocks[static_cast<std::size_t>(b)] = eval_block(b);
        }
      }));
    }
    for (auto& f : futs) f.get();
  }

  // Reduction in fixed block order keeps multi-worker runs bit-identical.
  Matrix sum = Matrix::Zero(rows, cols);
  Matrix sum_sq = Matrix::Zero(rows, cols);
  for (auto& b : blocks) {
    sum += b.sum;
    sum_sq += b.sum_sq;
  }

  ExpectationResult res;
  res.value = sum / static_cast<double>(n);
  if (n > 1) {
    Matrix var = (sum_sq - static_cast<double>(n) * res.value.cwiseProduct(res.value)) /
                 static_cast<double>(n - 1);
    res.std_error = var.cwiseMax(0.0).cwiseSqrt() / std::sqrt(static_cast<double>(n));
  } else {
    res.std_error = Matrix::Zero(rows, cols);
  }
  res.n_effective = n;
  res.mode_used = "monte_carlo";
  return res;
}

bool support_enumerable(const DominatedModel& model) {
  return static_cast<bool>(model.support);
}

}  // namespace

IntegrationSpec IntegrationSpec::exact() {
  IntegrationSpec s;
  s.mode = IntegrationMode::ExactDiscrete;
  return s;
}

IntegrationSpec IntegrationSpec::quadrature(int nodes_per_axis) {
  IntegrationSpec s;
  s.mode = IntegrationMode::Quadrature;
  s.quad_nodes = nodes_per_axis;
  return s;
}

IntegrationSpec IntegrationSpec::monte_carlo(long long n, std::uint64_t seed) {
  IntegrationSpec s;
  s.mode = IntegrationMode::MonteCarlo;
  s.mc_n = n;
  s.seed = seed;
  return s;
}

void IntegrationSpec::validate() const {
  if (quad_nodes != 0 && quad_nodes < 15) {
    throw ConfigError("integration: quadrature nodes per axis must be >= 15");
  }
  if (mc_n < 100) throw ConfigError("integration: monte_carlo n must be >= 100");
  if (workers < 1) throw ConfigError("integration: workers must be >= 1");
  if (box_sigmas <= 0) throw ConfigError("integration: box_sigmas must be positive");
}

const char* to_string(IntegrationMode mode) {
  switch (mode) {
    case IntegrationMode::Auto: return "auto";
    case IntegrationMode::ExactDiscrete: return "exact_discrete";
    case IntegrationMode::Quadrature: return "quadrature";
    case IntegrationMode::MonteCarlo: return "monte_carlo";
  }
  return "?";
}

IntegrationMode resolve_mode(const DominatedModel& model, const IntegrationSpec& spec) {
  spec.validate();
  switch (spec.mode) {
    case IntegrationMode::ExactDiscrete:
      if (model.measure != MeasureKind::Counting) {
        throw CapabilityError("exact_discrete requested for a continuous model");
      }
      return IntegrationMode::ExactDiscrete;
    case IntegrationMode::Quadrature:
      if (model.measure != MeasureKind::Lebesgue) {
        throw CapabilityError("quadrature requested for a counting model");
      }
      if (model.obs_dim > kMaxQuadDim) {
        throw CapabilityError("quadrature limited to dimension <= 4 (model '" +
                              model.name + "' has dimension " +
                              std::to_string(model.obs_dim) + ")");
      }
      return IntegrationMode::Quadrature;
    case IntegrationMode::MonteCarlo:
      if (!model.sampler) {
        throw CapabilityError("monte_carlo requested but model '" + model.name +
                              "' has no sampler");
      }
      return IntegrationMode::MonteCarlo;
    case IntegrationMode::Auto:
      break;
  }
  if (model.measure == MeasureKind::Counting && support_enumerable(model)) {
    return IntegrationMode::ExactDiscrete;
  }
  if (model.measure == MeasureKind::Lebesgue && model.obs_dim <= kMaxQuadDim &&
      model.quad_hint) {
    return IntegrationMode::Quadrature;
  }
  if (model.sampler) return IntegrationMode::MonteCarlo;
  throw CapabilityError("model '" + model.name +
                        "' supports neither deterministic integration nor sampling");
}

bool deterministic_feasible(const DominatedModel& model, const IntegrationSpec& spec) {
  try {
    IntegrationMode m = resolve_mode(model, spec);
    return m == IntegrationMode::ExactDiscrete || m == IntegrationMode::Quadrature;
  } catch (const CapabilityError&) {
    return false;
  }
}

ExpectationResult expect(const DominatedModel& model, const Vector& theta,
                         const MatrixFn& h, const IntegrationSpec& spec) {
  model.require_theta(theta);
  switch (resolve_mode(model, spec)) {
    case IntegrationMode::ExactDiscrete: {
      // Auto may fall back to sampling when the product support overflows.
      try {
        return run_exact(model, theta, h, spec);
      } catch (const CapabilityError&) {
        if (spec.mode == IntegrationMode::Auto && model.sampler) {
          return run_monte_carlo(model, theta, h, spec);
        }
        throw;
      }
    }
    case IntegrationMode::Quadrature:
      return run_quadrature(model, theta, h, spec);
    case IntegrationMode::MonteCarlo:
      return run_monte_carlo(model, theta, h, spec);
    default:
      throw EvaluationError("unresolved integration mode");
  }
}

ExpectationResult expect_scalar(const DominatedModel& model, const Vector& theta,
                                const ScalarFn& h, const IntegrationSpec& spec) {
  return expect(
      model, theta,
      [&](const Observation& x) {
        Matrix m(1, 1);
        m(0, 0) = h(x);
        return m;
      },
      spec);
}

ExpectationResult expect_under_shifted(const DominatedModel& model,
                                       const Vector& theta0, const Vector& theta,
                                       const MatrixFn& h, const IntegrationSpec& spec) {
  model.require_theta(theta0);
  model.require_theta(theta);
  MatrixFn shifted = [&, theta0, theta](const Observation& x) -> Matrix {
    double ratio = likelihood_ratio(model, theta0, theta, x);
    if (std::isinf(ratio)) {
      throw AbsContinuityError(
          "likelihood ratio is +inf on the support: P_theta is not absolutely "
          "continuous w.r.t. P_theta0");
    }
    return ratio * h(x);
  };
  ExpectationResult res = expect(model, theta0, shifted, spec);
  res.mode_used += "+shifted";
  return res;
}

// Newton iteration on Legendre polynomials; standard Gauss-Legendre rule.
void legendre_rule(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    nodes[i] = -z;
    nodes[n - 1 - i] = z;
    weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

}  // namespace crpred
