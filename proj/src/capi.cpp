#include "crpred/crpred.h"

#include "report.hpp"

#include <cstring>
#include <new>
#include <string>

using namespace crpred;

struct crpred_model {
  CatalogEntry entry;
};

namespace {

thread_local std::string t_last_error;

crpred_status record_error(crpred_status code, const char* what) {
  t_last_error = what ? what : "unknown error";
  return code;
}

crpred_status from_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    return record_error(CRPRED_ERROR_CONFIG, e.what());
  } catch (const DomainError& e) {
    return record_error(CRPRED_ERROR_DOMAIN, e.what());
  } catch (const CapabilityError& e) {
    return record_error(CRPRED_ERROR_CAPABILITY, e.what());
  } catch (const Error& e) {
    return record_error(CRPRED_ERROR_NUMERIC, e.what());
  } catch (const std::bad_alloc& e) {
    return record_error(CRPRED_ERROR_INTERNAL, e.what());
  } catch (const std::exception& e) {
    return record_error(CRPRED_ERROR_INTERNAL, e.what());
  } catch (...) {
    return record_error(CRPRED_ERROR_INTERNAL, "unknown exception");
  }
}

Vector copy_vector(const double* data, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = data[i];
  return v;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

crpred_status require(bool cond, const char* msg) {
  if (cond) return CRPRED_OK;
  return record_error(CRPRED_ERROR_CONFIG, msg);
}

}  // namespace

extern "C" {

const char* crpred_version(void) { return CRPRED_VERSION; }

const char* crpred_last_error(void) { return t_last_error.c_str(); }

crpred_status crpred_model_open(const char* catalog_id, crpred_model** out) {
  if (require(catalog_id && out, "catalog_id and out must be non-NULL") != CRPRED_OK) {
    return CRPRED_ERROR_CONFIG;
  }
  try {
    auto* handle = new crpred_model{make_catalog_entry(catalog_id)};
    *out = handle;
    return CRPRED_OK;
  } catch (...) {
    *out = nullptr;
    return from_exception();
  }
}

void crpred_model_close(crpred_model* model) { delete model; }

int crpred_model_param_dim(const crpred_model* model) {
  return model ? model->entry.model->domain.dim : -1;
}

int crpred_model_obs_dim(const crpred_model* model) {
  return model ? model->entry.model->obs_dim : -1;
}

crpred_status crpred_log_density(crpred_model* model, const double* x,
                                 const double* theta, double* out) {
  if (require(model && x && theta && out, "null argument") != CRPRED_OK) {
    return CRPRED_ERROR_CONFIG;
  }
  try {
    const DominatedModel& m = *model->entry.model;
    *out = log_density(m, copy_vector(x, m.obs_dim), copy_vector(theta, m.domain.dim));
    return CRPRED_OK;
  } catch (...) {
    return from_exception();
  }
}

crpred_status crpred_likelihood_ratio(crpred_model* model, const double* theta0,
                                      const double* theta, const double* x, double* out) {
  if (require(model && theta0 && theta && x && out, "null argument") != CRPRED_OK) {
    return CRPRED_ERROR_CONFIG;
  }
  try {
    const DominatedModel& m = *model->entry.model;
    *out = likelihood_ratio(m, copy_vector(theta0, m.domain.dim),
                            copy_vector(theta, m.domain.dim), copy_vector(x, m.obs_dim));
    return CRPRED_OK;
  } catch (...) {
    return from_exception();
  }
}

crpred_status crpred_sample(crpred_model* model, const double* theta, long long n,
                            uint64_t seed, double* out) {
  if (require(model && theta && out && n >= 1, "null argument or n < 1") != CRPRED_OK) {
    return CRPRED_ERROR_CONFIG;
  }
  try {
    const DominatedModel& m = *model->entry.model;
    SampleBatch batch = sample(m, copy_vector(theta, m.domain.dim), n, seed);
    for (long long i = 0; i < n; ++i) {
      for (int j = 0; j < m.obs_dim; ++j) {
        out[i * m.obs_dim + j] = batch.observations[static_cast<std::size_t>(i)][j];
      }
    }
    return CRPRED_OK;
  } catch (...) {
    return from_exception();
  }
}

crpred_status crpred_score(crpred_model* model, const double* x, const double* theta,
                           double* out) {
  if (require(model && x && theta && out, "null argument") != CRPRED_OK) {
    return CRPRED_ERROR_CONFIG;
  }
  try {
    const DominatedModel& m = *model->entry.model;
    Vector s = score(m, copy_vector(theta, m.domain.dim), copy_vector(x, m.obs_dim));
    for (int i = 0; i < m.domain.dim; ++i) out[i] = s[i];
    return CRPRED_OK;
  } catch (...) {
    return from_exception();
  }
}

crpred_status crpred_fisher(crpred_model* model, const double* theta,
                            const char* integration_json, uint64_t seed, double* out,
                            double* out_std_error) {
  if (require(model && theta && out, "null argument") != CRPRED_OK) {
    return CRPRED_ERROR_CONFIG;
  }
  try {
    const DominatedModel& m = *model->entry.model;
    IntegrationSpec spec;
    if (integration_json && *integration_json) {
      nlohmann::json ij = nlohmann::json::parse(integration_json);
      std::string mode = ij.value("mode", "auto");
      if (mode == "auto") {
        spec.mode = IntegrationMode::Auto;
      } else if (mode == "exact") {
        spec.mode = IntegrationMode::ExactDiscrete;
      } else if (mode == "quadrature") {
        spec.mode = IntegrationMode::Quadrature;
      } else if (mode == "monte_carlo") {
        spec.mode = IntegrationMode::MonteCarlo;
      } else {
        throw ConfigError("integration.mode must be auto|exact|quadrature|monte_carlo");
      }
      spec.quad_nodes = ij.value("nodes", 0);
      spec.box_sigmas = ij.value("box_sigmas", 10.0);
      spec.mc_n = ij.value("mc_n", 100000LL);
      spec.workers = ij.value("workers", 1);
      spec.validate();
    }
    spec.seed = seed;
    FisherResult I = fisher_information(m, copy_vector(theta, m.domain.dim), spec);
    const int d = m.domain.dim;
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) {
        out[r * d + c] = I.value(r, c);
        if (out_std_error) out_std_error[r * d + c] = I.std_error(r, c);
      }
    }
    return CRPRED_OK;
  } catch (...) {
    return from_exception();
  }
}

crpred_status crpred_run(const char* command, const char* config_json,
                         const crpred_run_options* options, char** report_json,
                         char** csv_out) {
  if (require(command && config_json && report_json, "null argument") != CRPRED_OK) {
    return CRPRED_ERROR_CONFIG;
  }
  *report_json = nullptr;
  if (csv_out) *csv_out = nullptr;
  try {
    std::optional<std::uint64_t> seed_override;
    bool timing = false;
    if (options) {
      if (options->has_seed_override) seed_override = options->seed_override;
      timing = options->include_timing != 0;
    }
    RunOutput out = run_command(command, config_json, seed_override, timing);
    *report_json = dup_string(out.report.dump(2) + "\n");
    if (csv_out) *csv_out = dup_string(out.csv);
    if (out.exit_code == 4) {
      return record_error(CRPRED_ERROR_ASSUMPTION,
                          "assumption-violation verdict (see report)");
    }
    return CRPRED_OK;
  } catch (...) {
    return from_exception();
  }
}

void crpred_string_free(char* s) { delete[] s; }

}  // extern "C"
