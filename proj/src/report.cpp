#include "report.hpp"

#include "covariance.hpp"
#include "reconstruction.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <future>
#include <mutex>
#include <set>
#include <sstream>

namespace crpred {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::set<std::string>& known_commands() {
  static const std::set<std::string> cmds = {
      "fisher",     "score",  "l2diag",       "lemma106",    "continuity",
      "bound",      "qep",    "efficiency",   "biased-bound", "msep",
      "lemma1",     "reconstruct", "check-assumptions"};
  return cmds;
}

[[noreturn]] void config_fail(const std::string& msg) { throw ConfigError(msg); }

Vector to_vector(const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.empty()) config_fail(what + " must be a nonempty array");
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) config_fail(what + " must contain numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

std::vector<Vector> to_vector_list(const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.empty()) config_fail(what + " must be a nonempty array");
  std::vector<Vector> out;
  for (const auto& item : arr) out.push_back(to_vector(item, what + " entry"));
  return out;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      config_fail("unknown key '" + it.key() + "' in " + where);
    }
  }
}

// ---------------------------------------------------------------------------
// RunConfig

struct RunConfig {
  std::string command;
  std::string model_id;
  std::vector<Vector> theta_grid;
  IntegrationSpec integration;
  std::uint64_t seed = 1;

  std::string predictand_id;
  std::string predictor_id;
  std::string biased_predictand_id;
  std::string conditional_id;

  std::vector<Observation> x_points;
  double score_step = 1e-5;

  Vector u_direction;
  double u_base = 0.125;
  double u_factor = 0.5;
  int u_count = 6;
  std::vector<Vector> u_list;  // explicit override

  double continuity_tol = 1e-3;
  bool continuity_weighted = false;

  Vector theta0;
  std::vector<Vector> path_waypoints;
  int path_steps = 400;
  bool check_path_independence = true;
  bool check_gradient = true;
  bool check_ratio = true;
  int ratio_points = 100;

  long long lemma1_instances = 1000;
  int lemma1_max_k = 3;
  int lemma1_max_d = 3;
  int lemma1_max_points = 8;

  Vector nb_center;
  double nb_radius = 0.25;
  int nb_points = 3;

  double efficiency_tol = 1e-6;
};

bool needs_model(const std::string& command) { return command != "lemma1"; }

bool needs_predictor_pair(const std::string& command) {
  return command == "qep" || command == "bound" || command == "efficiency" ||
         command == "check-assumptions";
}

bool needs_u_ladder(const std::string& command) {
  return command == "l2diag" || command == "lemma106" || command == "continuity";
}

IntegrationSpec parse_integration(const json& obj, std::uint64_t seed) {
  IntegrationSpec spec;
  reject_unknown_keys(obj, {"mode", "nodes", "box_sigmas", "mc_n", "workers"},
                      "integration");
  std::string mode = obj.value("mode", "auto");
  if (mode == "auto") {
    spec.mode = IntegrationMode::Auto;
  } else if (mode == "exact") {
    spec.mode = IntegrationMode::ExactDiscrete;
  } else if (mode == "quadrature") {
    spec.mode = IntegrationMode::Quadrature;
  } else if (mode == "monte_carlo") {
    spec.mode = IntegrationMode::MonteCarlo;
  } else {
    config_fail("integration.mode must be auto|exact|quadrature|monte_carlo");
  }
  spec.quad_nodes = obj.value("nodes", 0);
  spec.box_sigmas = obj.value("box_sigmas", 10.0);
  spec.mc_n = obj.value("mc_n", 100000LL);
  spec.workers = obj.value("workers", 1);
  spec.seed = seed;
  spec.validate();
  return spec;
}

std::vector<Vector> parse_theta_grid(const json& grid, int dim) {
  if (grid.is_array()) return to_vector_list(grid, "theta_grid");
  if (!grid.is_object()) config_fail("theta_grid must be an array or {from,to,count}");
  reject_unknown_keys(grid, {"from", "to", "count"}, "theta_grid");
  if (!grid.contains("from") || !grid.contains("to") || !grid.contains("count")) {
    config_fail("theta_grid object needs from, to and count");
  }
  Vector from = to_vector(grid["from"], "theta_grid.from");
  Vector to = to_vector(grid["to"], "theta_grid.to");
  long long count = grid["count"].get<long long>();
  if (from.size() != to.size()) config_fail("theta_grid from/to dimension mismatch");
  if (count < 1) config_fail("theta_grid count must be >= 1");
  std::vector<Vector> points;
  for (long long i = 0; i < count; ++i) {
    double t = (count == 1) ? 0.0 : static_cast<double>(i) / (count - 1);
    points.push_back(from + t * (to - from));
  }
  (void)dim;
  return points;
}

RunConfig parse_config(const std::string& command, const std::string& config_text,
                       std::optional<std::uint64_t> seed_override) {
  if (!is_known_command(command)) config_fail("unknown command '" + command + "'");
  json root;
  try {
    root = json::parse(config_text);
  } catch (const json::parse_error& e) {
    config_fail(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) config_fail("config must be a JSON object");

  std::set<std::string> allowed = {"seed", "integration"};
  if (needs_model(command)) {
    allowed.insert("model");
    allowed.insert("theta_grid");
  }
  if (command == "score") {
    allowed.insert("x");
    allowed.insert("score_step");
  }
  if (needs_u_ladder(command)) {
    allowed.insert("u");
    allowed.insert("u_list");
  }
  if (command == "continuity") allowed.insert("continuity");
  if (needs_predictor_pair(command)) {
    allowed.insert("predictand");
    allowed.insert("predictor");
  }
  if (command == "bound" || command == "efficiency") allowed.insert("efficiency_tol");
  if (command == "biased-bound") {
    allowed.insert("biased_predictand");
    allowed.insert("predictor");
  }
  if (command == "msep") {
    allowed.insert("predictand");
    allowed.insert("conditional");
    allowed.insert("predictor");
  }
  if (command == "reconstruct") {
    allowed.insert("predictand");
    allowed.insert("predictor");
    allowed.insert("reconstruct");
  }
  if (command == "check-assumptions") allowed.insert("neighborhood");
  if (command == "lemma1") allowed.insert("lemma1");
  reject_unknown_keys(root, allowed, "config");

  RunConfig cfg;
  cfg.command = command;
  cfg.seed = root.value("seed", 1ULL);
  if (seed_override) {
    cfg.seed = *seed_override;
  } else if (const char* env = std::getenv("CRPRED_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      config_fail("CRPRED_SEED must be an unsigned integer");
    }
  }
  cfg.integration = parse_integration(root.value("integration", json::object()), cfg.seed);

  if (needs_model(command)) {
    if (!root.contains("model")) config_fail("config needs a 'model' identifier");
    cfg.model_id = root["model"].get<std::string>();
  }

  if (command == "score") {
    if (root.contains("x")) cfg.x_points = to_vector_list(root["x"], "x");
    cfg.score_step = root.value("score_step", 1e-5);
  }
  if (needs_u_ladder(command)) {
    if (root.contains("u_list")) {
      cfg.u_list = to_vector_list(root["u_list"], "u_list");
    }
    if (root.contains("u")) {
      const json& u = root["u"];
      reject_unknown_keys(u, {"direction", "base", "factor", "count"}, "u");
      if (u.contains("direction")) cfg.u_direction = to_vector(u["direction"], "u.direction");
      cfg.u_base = u.value("base", 0.125);
      cfg.u_factor = u.value("factor", 0.5);
      cfg.u_count = u.value("count", 6);
    }
  }
  if (command == "continuity" && root.contains("continuity")) {
    const json& c = root["continuity"];
    reject_unknown_keys(c, {"tol", "weighted"}, "continuity");
    cfg.continuity_tol = c.value("tol", 1e-3);
    cfg.continuity_weighted = c.value("weighted", false);
  }
  if (root.contains("predictand")) cfg.predictand_id = root["predictand"].get<std::string>();
  if (root.contains("predictor")) cfg.predictor_id = root["predictor"].get<std::string>();
  if (root.contains("biased_predictand")) {
    cfg.biased_predictand_id = root["biased_predictand"].get<std::string>();
  }
  if (root.contains("conditional")) cfg.conditional_id = root["conditional"].get<std::string>();
  if (root.contains("efficiency_tol")) cfg.efficiency_tol = root["efficiency_tol"].get<double>();

  if (command == "reconstruct") {
    if (!root.contains("reconstruct")) config_fail("reconstruct config block required");
    const json& r = root["reconstruct"];
    reject_unknown_keys(r,
                        {"theta0", "waypoints", "steps", "path_independence", "gradient",
                         "density_ratio", "ratio_points"},
                        "reconstruct");
    if (!r.contains("theta0")) config_fail("reconstruct.theta0 required");
    cfg.theta0 = to_vector(r["theta0"], "reconstruct.theta0");
    if (r.contains("waypoints")) {
      cfg.path_waypoints = to_vector_list(r["waypoints"], "reconstruct.waypoints");
    }
    cfg.path_steps = r.value("steps", 400);
    cfg.check_path_independence = r.value("path_independence", true);
    cfg.check_gradient = r.value("gradient", true);
    cfg.check_ratio = r.value("density_ratio", true);
    cfg.ratio_points = r.value("ratio_points", 100);
  }
  if (command == "lemma1" && root.contains("lemma1")) {
    const json& l = root["lemma1"];
    reject_unknown_keys(l, {"instances", "max_k", "max_d", "max_points"}, "lemma1");
    cfg.lemma1_instances = l.value("instances", 1000LL);
    cfg.lemma1_max_k = l.value("max_k", 3);
    cfg.lemma1_max_d = l.value("max_d", 3);
    cfg.lemma1_max_points = l.value("max_points", 8);
    if (cfg.lemma1_instances < 1) config_fail("lemma1.instances must be >= 1");
  }
  if (command == "check-assumptions") {
    if (!root.contains("neighborhood")) config_fail("neighborhood block required");
    const json& nb = root["neighborhood"];
    reject_unknown_keys(nb, {"center", "radius", "points_per_axis"}, "neighborhood");
    if (!nb.contains("center")) config_fail("neighborhood.center required");
    cfg.nb_center = to_vector(nb["center"], "neighborhood.center");
    cfg.nb_radius = nb.value("radius", 0.25);
    cfg.nb_points = nb.value("points_per_axis", 3);
    if (cfg.nb_points < 1) config_fail("neighborhood.points_per_axis must be >= 1");
  }

  if (needs_model(command)) {
    if (!root.contains("theta_grid")) config_fail("config needs a theta_grid");
    cfg.theta_grid = parse_theta_grid(root["theta_grid"], 0);
  }
  return cfg;
}

// Canonical echo with all defaults materialized; re-running the echo
// reproduces the report byte for byte in deterministic modes.
ordered_json echo_config(const RunConfig& cfg) {
  ordered_json out;
  if (!cfg.model_id.empty()) out["model"] = cfg.model_id;
  if (!cfg.theta_grid.empty()) {
    ordered_json grid = ordered_json::array();
    for (const auto& t : cfg.theta_grid) grid.push_back(vector_json(t));
    out["theta_grid"] = grid;
  }
  ordered_json integ;
  integ["mode"] = to_string(cfg.integration.mode);
  integ["nodes"] = cfg.integration.quad_nodes;
  integ["box_sigmas"] = cfg.integration.box_sigmas;
  integ["mc_n"] = cfg.integration.mc_n;
  integ["workers"] = cfg.integration.workers;
  out["integration"] = integ;
  out["seed"] = cfg.seed;

  if (!cfg.predictand_id.empty()) out["predictand"] = cfg.predictand_id;
  if (!cfg.predictor_id.empty()) out["predictor"] = cfg.predictor_id;
  if (!cfg.biased_predictand_id.empty()) out["biased_predictand"] = cfg.biased_predictand_id;
  if (!cfg.conditional_id.empty()) out["conditional"] = cfg.conditional_id;

  if (cfg.command == "score") {
    if (!cfg.x_points.empty()) {
      ordered_json xs = ordered_json::array();
      for (const auto& x : cfg.x_points) xs.push_back(vector_json(x));
      out["x"] = xs;
    }
    out["score_step"] = cfg.score_step;
  }
  if (needs_u_ladder(cfg.command)) {
    if (!cfg.u_list.empty()) {
      ordered_json us = ordered_json::array();
      for (const auto& u : cfg.u_list) us.push_back(vector_json(u));
      out["u_list"] = us;
    } else {
      ordered_json u;
      if (cfg.u_direction.size() > 0) u["direction"] = vector_json(cfg.u_direction);
      u["base"] = cfg.u_base;
      u["factor"] = cfg.u_factor;
      u["count"] = cfg.u_count;
      out["u"] = u;
    }
  }
  if (cfg.command == "continuity") {
    ordered_json c;
    c["tol"] = cfg.continuity_tol;
    c["weighted"] = cfg.continuity_weighted;
    out["continuity"] = c;
  }
  if (cfg.command == "reconstruct") {
    ordered_json r;
    r["theta0"] = vector_json(cfg.theta0);
    if (!cfg.path_waypoints.empty()) {
      ordered_json ws = ordered_json::array();
      for (const auto& w : cfg.path_waypoints) ws.push_back(vector_json(w));
      r["waypoints"] = ws;
    }
    r["steps"] = cfg.path_steps;
    r["path_independence"] = cfg.check_path_independence;
    r["gradient"] = cfg.check_gradient;
    r["density_ratio"] = cfg.check_ratio;
    r["ratio_points"] = cfg.ratio_points;
    out["reconstruct"] = r;
  }
  if (cfg.command == "lemma1") {
    ordered_json l;
    l["instances"] = cfg.lemma1_instances;
    l["max_k"] = cfg.lemma1_max_k;
    l["max_d"] = cfg.lemma1_max_d;
    l["max_points"] = cfg.lemma1_max_points;
    out["lemma1"] = l;
  }
  if (cfg.command == "check-assumptions") {
    ordered_json nb;
    nb["center"] = vector_json(cfg.nb_center);
    nb["radius"] = cfg.nb_radius;
    nb["points_per_axis"] = cfg.nb_points;
    out["neighborhood"] = nb;
  }
  if (cfg.command == "bound" || cfg.command == "efficiency") {
    out["efficiency_tol"] = cfg.efficiency_tol;
  }
  return out;
}

std::vector<Vector> resolve_u_ladder(const RunConfig& cfg, int dim) {
  if (!cfg.u_list.empty()) return cfg.u_list;
  Vector dir = cfg.u_direction;
  if (dir.size() == 0) dir = Vector::Ones(dim);
  if (dir.size() != dim) config_fail("u.direction dimension mismatch");
  return geometric_steps(dir, cfg.u_base, cfg.u_factor, cfg.u_count);
}

std::vector<Vector> neighborhood_grid(const Vector& center, double radius, int points) {
  const int d = static_cast<int>(center.size());
  std::vector<std::vector<double>> axes(d);
  for (int a = 0; a < d; ++a) {
    for (int i = 0; i < points; ++i) {
      double t = (points == 1) ? 0.0 : -1.0 + 2.0 * i / (points - 1);
      axes[a].push_back(center[a] + t * radius);
    }
  }
  std::vector<Vector> grid;
  std::vector<int> idx(d, 0);
  while (true) {
    Vector p(d);
    for (int a = 0; a < d; ++a) p[a] = axes[a][idx[a]];
    grid.push_back(p);
    int a = 0;
    while (a < d && ++idx[a] == static_cast<int>(axes[a].size())) {
      idx[a] = 0;
      ++a;
    }
    if (a == d) break;
  }
  return grid;
}

std::string theta_label(const Vector& theta) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (i) os << ",";
    os << theta[i];
  }
  os << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Per-command record builders

ordered_json expectation_json(const ExpectationResult& r, const std::string& prefix,
                              ordered_json rec = ordered_json::object()) {
  rec[prefix] = matrix_json(r.value);
  rec[prefix + "_std_error"] = matrix_json(r.std_error);
  rec[prefix + "_mode"] = r.mode_used;
  return rec;
}

ordered_json record_fisher(const CatalogEntry& entry, const Vector& theta,
                           const RunConfig& cfg) {
  FisherResult I = fisher_information(*entry.model, theta, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["fisher"] = matrix_json(I.value);
  rec["std_error"] = matrix_json(I.std_error);
  rec["condition"] = symmetric_condition(I.value);
  rec["mode"] = I.mode_used;
  return rec;
}

ordered_json record_score(const CatalogEntry& entry, const Vector& theta,
                          const RunConfig& cfg) {
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  ordered_json scores = ordered_json::array();
  if (cfg.x_points.empty()) config_fail("score command needs x points");
  for (const auto& x : cfg.x_points) {
    ordered_json s;
    s["x"] = vector_json(x);
    s["score"] = vector_json(score(*entry.model, theta, x, cfg.score_step));
    scores.push_back(s);
  }
  rec["scores"] = scores;
  ScoreMeanResult sm = score_mean(*entry.model, theta, cfg.integration);
  rec["score_mean"] = vector_json(sm.value);
  rec["score_mean_std_error"] = vector_json(sm.std_error);
  rec["mode"] = sm.mode_used;
  return rec;
}

ordered_json record_l2diag(const CatalogEntry& entry, const Vector& theta,
                           const RunConfig& cfg) {
  auto ladder = resolve_u_ladder(cfg, entry.model->domain.dim);
  HellingerDiagnostic diag = check_l2_diff(*entry.model, theta, ladder, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["u_norms"] = diag.u_norms;
  rec["remainders"] = diag.remainders;
  rec["std_errors"] = diag.std_errors;
  rec["dropped"] = diag.dropped;
  rec["fitted_exponent"] = diag.fitted_exponent;
  rec["passes"] = diag.passes;
  return rec;
}

ordered_json record_lemma106(const CatalogEntry& entry, const Vector& theta,
                             const RunConfig& cfg) {
  auto ladder = resolve_u_ladder(cfg, entry.model->domain.dim);
  Lemma106Report rep = check_lemma_106(*entry.model, theta, ladder, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["u_norms"] = rep.u_norms;
  rec["epsilons"] = rep.epsilons;
  rec["cond1_prob"] = rep.cond1_prob;
  rec["cond1_std_error"] = rep.cond1_std_error;
  rec["cond1_mode"] = rep.cond1_mode;
  rec["cond2_residual"] = rep.cond2_residual;
  rec["cond2_std_error"] = rep.cond2_std_error;
  rec["cond1_pass"] = rep.cond1_pass;
  rec["cond2_pass"] = rep.cond2_pass;
  return rec;
}

ordered_json record_continuity(const CatalogEntry& entry, const Vector& theta,
                               const RunConfig& cfg) {
  auto ladder = resolve_u_ladder(cfg, entry.model->domain.dim);
  std::vector<Vector> sequence;
  for (const auto& u : ladder) sequence.push_back(theta + u);
  ContinuityReport rep =
      check_continuous_l2(*entry.model, theta, sequence, cfg.integration,
                          cfg.continuity_weighted, cfg.continuity_tol);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["distances"] = rep.distances;
  rec["residuals"] = rep.residuals;
  rec["std_errors"] = rep.std_errors;
  rec["passes"] = rep.passes;
  rec["weighted"] = rep.weighted_variant;
  rec["tol"] = rep.tol;
  return rec;
}

ordered_json record_qep(const CatalogEntry& entry, const Vector& theta,
                        const RunConfig& cfg) {
  const Predictand& g = entry.predictand(cfg.predictand_id);
  const Predictor& p = entry.predictor(cfg.predictor_id);
  ExpectationResult q = qep(*entry.model, theta, p, g, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  return expectation_json(q, "qep", rec);
}

ordered_json record_bound(const CatalogEntry& entry, const Vector& theta,
                          const RunConfig& cfg) {
  const Predictand& g = entry.predictand(cfg.predictand_id);
  const Predictor& p = entry.predictor(cfg.predictor_id);
  BoundReport rep = bound_report(*entry.model, theta, p, g, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["qep"] = matrix_json(rep.qep);
  rec["qep_std_error"] = matrix_json(rep.qep_std_error);
  rec["bound"] = matrix_json(rep.bound);
  rec["gap"] = matrix_json(rep.gap);
  rec["gap_min_eigenvalue"] = rep.gap_min_eigenvalue;
  rec["equality_residual"] = rep.equality_residual;
  rec["equality_residual_std_error"] = rep.equality_residual_std_error;
  rec["G"] = matrix_json(rep.G_used);
  rec["fisher"] = matrix_json(rep.I_used);
  rec["form"] = rep.form;
  if (rep.bias_used.size() > 0) rec["bias"] = vector_json(rep.bias_used);
  return rec;
}

ordered_json record_efficiency(const CatalogEntry& entry, const Vector& theta,
                               const RunConfig& cfg) {
  const Predictand& g = entry.predictand(cfg.predictand_id);
  const Predictor& p = entry.predictor(cfg.predictor_id);
  EfficiencyResidual er = efficiency_residual(*entry.model, theta, p, g, cfg.integration);
  ExpectationResult q = qep(*entry.model, theta, p, g, cfg.integration);
  Matrix bound = cr_bound_unbiased(*entry.model, theta, g, cfg.integration);
  EfficiencyGap gap = efficiency_gap(symmetrized(q.value), bound,
                                     std::max(cfg.efficiency_tol,
                                              3.0 * q.std_error.cwiseAbs().maxCoeff()));
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["equality_residual"] = er.value;
  rec["equality_residual_std_error"] = er.std_error;
  rec["form"] = er.form;
  rec["qep"] = matrix_json(q.value);
  rec["bound"] = matrix_json(bound);
  rec["gap_min_eigenvalue"] = gap.min_eigenvalue;
  rec["is_efficient"] = gap.is_efficient;
  return rec;
}

ordered_json record_biased_bound(const CatalogEntry& entry, const Vector& theta,
                                 const RunConfig& cfg) {
  const BiasedPredictand& rb = entry.biased_predictand(cfg.biased_predictand_id);
  const Predictor& p = entry.predictor(cfg.predictor_id);
  Matrix bound = cr_bound_biased(*entry.model, theta, rb, cfg.integration, &p);
  ExpectationResult q = qep(*entry.model, theta, p, rb.r, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["bound"] = matrix_json(bound);
  rec["qep"] = matrix_json(q.value);
  rec["qep_std_error"] = matrix_json(q.std_error);
  Matrix gap = symmetrized(q.value) - bound;
  rec["gap_min_eigenvalue"] = min_eigenvalue(gap);
  return rec;
}

ordered_json record_msep(const CatalogEntry& entry, const Vector& theta,
                         const RunConfig& cfg) {
  const Predictand& g = entry.predictand(cfg.predictand_id);
  const Predictand& r = entry.predictand(cfg.conditional_id);
  const Predictor& p = entry.predictor(cfg.predictor_id);
  MsepDecomposition dec = msep_decompose(*entry.model, theta, p, g, r, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["total"] = matrix_json(dec.total.value);
  rec["total_std_error"] = matrix_json(dec.total.std_error);
  rec["qep_term"] = matrix_json(dec.qep_term.value);
  rec["qep_term_std_error"] = matrix_json(dec.qep_term.std_error);
  rec["incompressible"] = matrix_json(dec.incompressible.value);
  rec["incompressible_std_error"] = matrix_json(dec.incompressible.std_error);
  rec["residual_norm"] = dec.residual_norm;
  rec["residual_allowance"] = dec.residual_allowance;
  rec["consistent"] = dec.consistent;
  return rec;
}

ordered_json record_reconstruct(const CatalogEntry& entry, const Vector& theta,
                                const RunConfig& cfg) {
  const Predictand& g = entry.predictand(cfg.predictand_id);
  const Predictor& p = entry.predictor(cfg.predictor_id);
  const DominatedModel& model = *entry.model;

  ParameterPath path;
  path.waypoints.push_back(cfg.theta0);
  for (const auto& w : cfg.path_waypoints) path.waypoints.push_back(w);
  path.waypoints.push_back(theta);
  path.steps = cfg.path_steps;

  PathTable table(model, path, g, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["theta0"] = vector_json(cfg.theta0);
  rec["A"] = vector_json(table.A());
  rec["A_error_estimate"] = table.a_error_estimate();

  // B at a handful of observations, plus the spread across them.
  std::vector<Observation> xs;
  if (model.measure == MeasureKind::Counting && model.support) {
    auto sup = model.support(cfg.theta0);
    for (std::size_t i = 0; i < sup.size() && i < 8; ++i) xs.push_back(sup[i]);
  } else if (model.sampler) {
    xs = model.sampler(cfg.theta0, 8, cfg.seed);
  } else if (model.quad_hint) {
    auto hint = model.quad_hint(cfg.theta0);
    for (int i = -2; i <= 2; ++i) {
      Observation x(model.obs_dim);
      for (int a = 0; a < model.obs_dim; ++a) {
        x[a] = hint[static_cast<std::size_t>(a)].first +
               i * hint[static_cast<std::size_t>(a)].second;
      }
      xs.push_back(x);
    }
  }
  ordered_json bs = ordered_json::array();
  double bmin = std::numeric_limits<double>::infinity();
  double bmax = -std::numeric_limits<double>::infinity();
  for (const auto& x : xs) {
    double b = table.B(x);
    bmin = std::min(bmin, b);
    bmax = std::max(bmax, b);
    ordered_json e;
    e["x"] = vector_json(x);
    e["B"] = b;
    bs.push_back(e);
  }
  rec["B_samples"] = bs;
  if (!xs.empty()) rec["B_spread"] = bmax - bmin;

  if (cfg.check_path_independence && model.domain.dim >= 1) {
    // Compare against a path routed through a perturbed midpoint (an
    // L-shaped detour in dimension >= 2, a re-parametrized segment in 1-D).
    ParameterPath alt;
    alt.steps = cfg.path_steps;
    alt.waypoints.push_back(cfg.theta0);
    Vector mid = 0.5 * (cfg.theta0 + theta);
    if (model.domain.dim >= 2) {
      Vector corner = cfg.theta0;
      corner[0] = theta[0];
      alt.waypoints.push_back(corner);
    } else {
      alt.waypoints.push_back(mid);
    }
    alt.waypoints.push_back(theta);
    PathIndependenceReport pi =
        path_independence_check(model, path, alt, g, cfg.integration);
    rec["delta_A"] = pi.delta_A;
    rec["jacobian_condition_residual"] = pi.jacobian_condition_residual;
  }

  if (cfg.check_ratio) {
    DensityRatioReport dr =
        validate_density_ratio(model, cfg.theta0, theta, path, p, g, cfg.integration,
                               cfg.ratio_points, cfg.seed);
    rec["normalization"] = dr.normalization;
    rec["normalization_std_error"] = dr.normalization_std_error;
    rec["pointwise_max_abs_log_error"] = dr.pointwise_max_abs_log_error;
    rec["ratio_points_checked"] = dr.points_checked;
  }

  if (cfg.check_gradient) {
    std::vector<Observation> sample = xs;
    if (sample.empty()) config_fail("reconstruct: no observations for gradient check");
    rec["gradient_condition_residual"] = gradient_condition_check(
        model, cfg.theta0, theta, g, sample, cfg.integration, cfg.path_steps);
  }
  return rec;
}

ordered_json record_check_assumptions(const CatalogEntry& entry, const Vector& theta,
                                      const RunConfig& cfg) {
  const Predictand& g = entry.predictand(cfg.predictand_id);
  const Predictor& p = entry.predictor(cfg.predictor_id);
  Vector center = cfg.nb_center.size() > 0 ? cfg.nb_center : theta;
  auto grid = neighborhood_grid(center, cfg.nb_radius, cfg.nb_points);
  AssumptionReport rep =
      check_assumptions(*entry.model, theta, grid, p, g, cfg.integration);
  ordered_json rec;
  rec["theta"] = vector_json(theta);
  rec["grid_size"] = rep.grid_size;
  ordered_json items = ordered_json::array();
  for (const auto& item : rep.items) {
    ordered_json it;
    it["name"] = item.name;
    it["pass"] = item.pass;
    it["value"] = item.value;
    if (!item.note.empty()) it["note"] = item.note;
    items.push_back(it);
  }
  rec["items"] = items;
  rec["all_pass"] = rep.all_pass;
  return rec;
}

ordered_json run_lemma1(const RunConfig& cfg, ordered_json& verdicts) {
  double min_eig = std::numeric_limits<double>::infinity();
  double max_trace_gap = 0.0;
  for (long long i = 0; i < cfg.lemma1_instances; ++i) {
    DiscreteJoint joint =
        random_joint(cfg.seed + static_cast<std::uint64_t>(i), cfg.lemma1_max_k,
                     cfg.lemma1_max_d, cfg.lemma1_max_points);
    CovarianceReport rep = covariance_bound(joint);
    min_eig = std::min(min_eig, rep.min_eigenvalue);
    max_trace_gap =
        std::max(max_trace_gap, std::abs(rep.equality_residual - rep.residual.trace()));
  }
  ordered_json rec;
  rec["instances"] = cfg.lemma1_instances;
  rec["min_residual_eigenvalue"] = min_eig;
  rec["max_equality_trace_gap"] = max_trace_gap;
  bool pass = min_eig >= -1e-10 && max_trace_gap <= 1e-10;
  rec["pass"] = pass;
  ordered_json v;
  v["name"] = "covariance_inequality_randomized";
  v["pass"] = pass;
  v["min_residual_eigenvalue"] = min_eig;
  v["max_equality_trace_gap"] = max_trace_gap;
  v["tolerance"] = 1e-10;
  verdicts.push_back(v);
  return rec;
}

using RecordFn = ordered_json (*)(const CatalogEntry&, const Vector&, const RunConfig&);

RecordFn record_builder(const std::string& command) {
  if (command == "fisher") return &record_fisher;
  if (command == "score") return &record_score;
  if (command == "l2diag") return &record_l2diag;
  if (command == "lemma106") return &record_lemma106;
  if (command == "continuity") return &record_continuity;
  if (command == "qep") return &record_qep;
  if (command == "bound") return &record_bound;
  if (command == "efficiency") return &record_efficiency;
  if (command == "biased-bound") return &record_biased_bound;
  if (command == "msep") return &record_msep;
  if (command == "reconstruct") return &record_reconstruct;
  if (command == "check-assumptions") return &record_check_assumptions;
  return nullptr;
}

// ---------------------------------------------------------------------------
// CSV flattening: one row per record, scalar leaves only, identical numeric
// text as the JSON report.

void flatten_into(const ordered_json& value, const std::string& key,
                  std::vector<std::pair<std::string, std::string>>& cells) {
  if (value.is_object()) {
    if (value.contains("shape") && value.contains("data")) {
      const auto& shape = value["shape"];
      const auto& data = value["data"];
      long long rows = shape[0].get<long long>();
      long long cols = shape[1].get<long long>();
      for (long long r = 0; r < rows; ++r) {
        for (long long c = 0; c < cols; ++c) {
          cells.emplace_back(key + "_" + std::to_string(r) + "_" + std::to_string(c),
                             data[static_cast<std::size_t>(r * cols + c)].dump());
        }
      }
      return;
    }
    for (auto it = value.begin(); it != value.end(); ++it) {
      flatten_into(it.value(), key.empty() ? it.key() : key + "." + it.key(), cells);
    }
    return;
  }
  if (value.is_array()) {
    bool scalars = true;
    for (const auto& item : value) {
      if (!item.is_number() && !item.is_boolean()) scalars = false;
    }
    if (scalars) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        cells.emplace_back(key + "_" + std::to_string(i), value[i].dump());
      }
    }
    // nested structures (score lists, B samples) stay JSON-only
    return;
  }
  cells.emplace_back(key, value.dump());
}

std::string records_to_csv(const ordered_json& records) {
  if (!records.is_array() || records.empty()) return "";
  std::vector<std::vector<std::pair<std::string, std::string>>> rows;
  for (const auto& rec : records) {
    std::vector<std::pair<std::string, std::string>> cells;
    flatten_into(rec, "", cells);
    rows.push_back(std::move(cells));
  }
  std::ostringstream os;
  const auto& header = rows.front();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) os << ",";
    os << header[i].first;
  }
  os << "\n";
  // Rows share the schema (same record builder); emit positionally.
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ",";
      os << row[i].second;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace

bool is_known_command(const std::string& command) {
  return known_commands().count(command) > 0;
}

nlohmann::ordered_json matrix_json(const Matrix& m) {
  ordered_json out;
  out["shape"] = {m.rows(), m.cols()};
  ordered_json data = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  out["data"] = data;
  return out;
}

nlohmann::ordered_json vector_json(const Vector& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

RunOutput run_command(const std::string& command, const std::string& config_json,
                      std::optional<std::uint64_t> seed_override, bool include_timing) {
  auto t_start = std::chrono::steady_clock::now();
  RunConfig cfg = parse_config(command, config_json, seed_override);

  ordered_json report;
  report["tool"] = {{"name", "crpred"}, {"version", kToolVersion}};
  report["command"] = command;
  report["config"] = echo_config(cfg);

  ordered_json records = ordered_json::array();
  ordered_json verdicts = ordered_json::array();
  int exit_code = 0;

  if (command == "lemma1") {
    records.push_back(run_lemma1(cfg, verdicts));
  } else {
    CatalogEntry entry = make_catalog_entry(cfg.model_id);
    RecordFn builder = record_builder(command);
    if (!builder) config_fail("unhandled command '" + command + "'");

    const std::size_t n = cfg.theta_grid.size();
    std::vector<ordered_json> results(n);
    auto run_point = [&](std::size_t i) {
      try {
        results[i] = builder(entry, cfg.theta_grid[i], cfg);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw EvaluationError("command '" + command + "' at theta=" +
                              theta_label(cfg.theta_grid[i]) + ": " + e.what());
      }
    };
    int workers = std::min<int>(cfg.integration.workers, static_cast<int>(n));
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) run_point(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::future<void>> futs;
      std::exception_ptr first_error;
      std::mutex error_mutex;
      for (int w = 0; w < workers; ++w) {
        futs.push_back(std::async(std::launch::async, [&]() {
          std::size_t i;
          while ((i = next.fetch_add(1)) < n) {
            try {
              run_point(i);
            } catch (...) {
              std::lock_guard<std::mutex> lock(error_mutex);
              if (!first_error) first_error = std::current_exception();
              return;
            }
          }
        }));
      }
      for (auto& f : futs) f.get();
      if (first_error) std::rethrow_exception(first_error);
    }
    for (auto& r : results) records.push_back(std::move(r));

    // Verdicts summarize per-theta pass flags where the command defines them.
    auto collect_flag = [&](const std::string& flag, const std::string& verdict_name) {
      bool any = false, all = true;
      for (const auto& rec : records) {
        if (rec.contains(flag)) {
          any = true;
          all = all && rec[flag].get<bool>();
        }
      }
      if (any) {
        ordered_json v;
        v["name"] = verdict_name;
        v["pass"] = all;
        verdicts.push_back(v);
        return all;
      }
      return true;
    };
    collect_flag("passes", command + "_passes");
    collect_flag("consistent", "msep_decomposition_consistent");
    bool assumptions_ok = collect_flag("all_pass", "assumptions_hold");
    if (command == "check-assumptions" && !assumptions_ok) exit_code = 4;
  }

  report["records"] = records;
  report["verdicts"] = verdicts;
  if (include_timing) {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t_start)
                  .count();
    report["timing"] = {{"total_ms", ms}};
  }

  RunOutput out;
  out.report = report;
  out.csv = records_to_csv(records);
  out.exit_code = exit_code;
  return out;
}

}  // namespace crpred
