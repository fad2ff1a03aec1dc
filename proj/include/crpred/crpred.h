/* crpred — prediction Cramér-Rao bounds, L²-differentiability diagnostics,
 * and exponential-family reconstruction.
 *
 * C API of the shared library. All state lives behind opaque handles; every
 * call returns a status code and leaves a thread-local message retrievable
 * via crpred_last_error(). Matrices cross the boundary as row-major double
 * buffers sized by the caller.
 */
#ifndef CRPRED_H
#define CRPRED_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CRPRED_API __declspec(dllexport)
#else
#define CRPRED_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define CRPRED_VERSION "0.1.0"

typedef enum crpred_status {
  CRPRED_OK = 0,
  CRPRED_ERROR_CONFIG = 2,     /* invalid configuration or precondition */
  CRPRED_ERROR_NUMERIC = 3,    /* singular matrix, divergent integral, ... */
  CRPRED_ERROR_ASSUMPTION = 4, /* assumption-violation verdict (report still produced) */
  CRPRED_ERROR_DOMAIN = 5,     /* parameter outside the model domain */
  CRPRED_ERROR_CAPABILITY = 6, /* operation unsupported by the model */
  CRPRED_ERROR_INTERNAL = 7
} crpred_status;

/* Opaque catalog entry: a model together with its named predictands and
 * predictors. */
typedef struct crpred_model crpred_model;

CRPRED_API const char* crpred_version(void);

/* Message for the most recent failing call on this thread; valid until the
 * next API call on the same thread. */
CRPRED_API const char* crpred_last_error(void);

/* Opens a catalog entry, e.g. "gaussian_location:n=10,sigma=1",
 * "bernoulli:n=1", "poisson:n=1", "ar1:n=20", "gaussian_mean2",
 * "uniform_scale", "expfam_gauss". */
CRPRED_API crpred_status crpred_model_open(const char* catalog_id, crpred_model** out);
CRPRED_API void crpred_model_close(crpred_model* model);

CRPRED_API int crpred_model_param_dim(const crpred_model* model);
CRPRED_API int crpred_model_obs_dim(const crpred_model* model);

/* log f_theta(x); -inf encodes zero density. */
CRPRED_API crpred_status crpred_log_density(crpred_model* model, const double* x,
                                            const double* theta, double* out);

/* Likelihood ratio of P_theta against P_theta0 at x; may be +inf off the
 * support of P_theta0. */
CRPRED_API crpred_status crpred_likelihood_ratio(crpred_model* model,
                                                 const double* theta0,
                                                 const double* theta, const double* x,
                                                 double* out);

/* n observations into out[n * obs_dim], row-major, deterministic in seed. */
CRPRED_API crpred_status crpred_sample(crpred_model* model, const double* theta,
                                       long long n, uint64_t seed, double* out);

/* Score (L2-derivative) at (x, theta) into out[param_dim]. */
CRPRED_API crpred_status crpred_score(crpred_model* model, const double* x,
                                      const double* theta, double* out);

/* Fisher information at theta into out[d*d] (row-major); std errors are
 * optional. integration_json follows the run-config "integration" object,
 * e.g. {"mode":"quadrature","nodes":128}; NULL selects auto mode. */
CRPRED_API crpred_status crpred_fisher(crpred_model* model, const double* theta,
                                       const char* integration_json, uint64_t seed,
                                       double* out, double* out_std_error);

typedef struct crpred_run_options {
  int has_seed_override;
  uint64_t seed_override;
  int include_timing; /* timing breaks byte-identical reruns; off by default */
} crpred_run_options;

/* Runs one batch command (fisher|score|l2diag|lemma106|continuity|bound|qep|
 * efficiency|biased-bound|msep|lemma1|reconstruct|check-assumptions) against
 * a JSON configuration. On success *report_json receives the report; if
 * csv_out is non-NULL it receives the flat per-theta table. Both are freed
 * with crpred_string_free. CRPRED_ERROR_ASSUMPTION still produces a report.
 * Seed precedence: options override, then CRPRED_SEED, then config. */
CRPRED_API crpred_status crpred_run(const char* command, const char* config_json,
                                    const crpred_run_options* options,
                                    char** report_json, char** csv_out);

CRPRED_API void crpred_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CRPRED_H */
