#ifndef CVAR_MDP_H
#define CVAR_MDP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CVAR_MDP_BUILD)
#define CVAR_API __declspec(dllexport)
#else
#define CVAR_API __declspec(dllimport)
#endif
#else
#define CVAR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum cvar_status {
  CVAR_OK = 0,
  CVAR_ERR_ARGUMENT = 1,
  CVAR_ERR_CONFIG = 2,
  CVAR_NOT_CONVERGED = 3,
  CVAR_ERR_RUNTIME = 4
} cvar_status;

typedef struct cvar_config cvar_config;
typedef struct cvar_model cvar_model;
typedef struct cvar_report cvar_report;

typedef struct cvar_metrics {
  double mean;
  double variance;
  double var_alpha;
  double cvar_alpha;
  double tail_prob_beta;
} cvar_metrics;

typedef struct cvar_model_info {
  double nu;
  double lambda;
  double lambda_max;
  size_t iterations;
  size_t doublings;
  size_t theta_dim;
  int converged;
} cvar_model_info;

/* Message of the last failed call on this thread ("" if none). */
CVAR_API const char* cvar_last_error(void);
CVAR_API const char* cvar_version(void);

/* Configs. */
CVAR_API cvar_status cvar_config_load_file(const char* path, cvar_config** out);
CVAR_API cvar_status cvar_config_load_string(const char* text, cvar_config** out);
/* Overrides one key and revalidates; the config is unchanged on error. */
CVAR_API cvar_status cvar_config_set(cvar_config* config, const char* key, const char* value);
/* Canonical text of the config; release with cvar_string_free. */
CVAR_API cvar_status cvar_config_to_string(const cvar_config* config, char** out);
CVAR_API void cvar_config_free(cvar_config* config);

/* Training. CVAR_NOT_CONVERGED still returns a usable model. */
CVAR_API cvar_status cvar_train(const cvar_config* config, cvar_model** out);
/* Writes model.txt and, when the model carries one, history.csv into dir. */
CVAR_API cvar_status cvar_model_save(const cvar_model* model, const char* dir);
CVAR_API cvar_status cvar_model_load(const char* path, cvar_model** out);
CVAR_API cvar_status cvar_model_info_get(const cvar_model* model, cvar_model_info* out);
/* Copies min(n, theta_dim) parameters into theta. */
CVAR_API cvar_status cvar_model_theta(const cvar_model* model, double* theta, size_t n);
CVAR_API void cvar_model_free(cvar_model* model);

/* Evaluation. episodes = 0 uses the configured count; seed overrides the
   configured seed when has_seed is nonzero. */
CVAR_API cvar_status cvar_evaluate(const cvar_model* model, size_t episodes, int has_seed, uint64_t seed,
                                   cvar_report** out);
/* Writes report.txt, losses.csv, histogram.csv and histogram_tail.csv. */
CVAR_API cvar_status cvar_report_save(const cvar_report* report, const char* dir);
CVAR_API cvar_status cvar_report_metrics(const cvar_report* report, cvar_metrics* out);
/* Borrowed pointer valid until cvar_report_free. */
CVAR_API cvar_status cvar_report_losses(const cvar_report* report, const double** losses, size_t* n);
CVAR_API void cvar_report_free(cvar_report* report);

/* Exact metrics of the model's policy by path enumeration (small horizons). */
CVAR_API cvar_status cvar_enumerate_oracle(const cvar_model* model, cvar_metrics* out);

/* Comparison table of report.txt files, first one as reference. */
CVAR_API cvar_status cvar_compare(const char* const* report_paths, size_t count, char** table);
CVAR_API void cvar_string_free(char* s);

/* Risk measures over raw samples. weights may be NULL for uniform weights. */
CVAR_API cvar_status cvar_value_at_risk(const double* samples, const double* weights, size_t n, double alpha,
                                        double* out);
CVAR_API cvar_status cvar_conditional_value_at_risk(const double* samples, const double* weights, size_t n,
                                                    double alpha, double* out);
CVAR_API cvar_status cvar_h_alpha(const double* samples, const double* weights, size_t n, double nu, double alpha,
                                  double* out);
CVAR_API cvar_status cvar_tail_probability(const double* samples, const double* weights, size_t n,
                                           double threshold, double* out);

#ifdef __cplusplus
}
#endif

#endif
