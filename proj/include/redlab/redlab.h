#ifndef REDLAB_H
#define REDLAB_H

/*
 * C interface to the redundancy lab.
 *
 * Every function returns a redlab_status. On failure the message is
 * available from redlab_last_error() on the same thread until the next
 * call. Handles are opaque and owned by the caller; release them with the
 * matching *_free function. Strings returned through char** out-parameters
 * are released with redlab_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(REDLAB_BUILDING_LIBRARY)
#    define REDLAB_API __declspec(dllexport)
#  else
#    define REDLAB_API __declspec(dllimport)
#  endif
#else
#  define REDLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum redlab_status {
  REDLAB_OK = 0,
  REDLAB_INVALID_ARGUMENT = 1, /* null pointer, bad size, bad enum value */
  REDLAB_DOMAIN_ERROR = 2,     /* view outside the support */
  REDLAB_UNSUPPORTED = 3,      /* operation undefined for this model family */
  REDLAB_NUMERICAL_ERROR = 4,  /* non-finite values, failed quadrature */
  REDLAB_CONFIG_ERROR = 5,     /* malformed config, document or CLI input */
  REDLAB_MODEL_INVALID = 6,    /* model invariants violated */
  REDLAB_INTERNAL_ERROR = 7
} redlab_status;

typedef enum redlab_scale { REDLAB_LOG_ODDS = 0, REDLAB_ODDS = 1 } redlab_scale;

typedef struct redlab_model redlab_model;
typedef struct redlab_scorer redlab_scorer;
typedef struct redlab_embedding redlab_embedding;
typedef struct redlab_config redlab_config;
typedef struct redlab_run redlab_run;

REDLAB_API const char* redlab_version(void);
REDLAB_API const char* redlab_last_error(void);
REDLAB_API const char* redlab_status_name(redlab_status status);
REDLAB_API void redlab_string_free(char* s);

/* ---- models ------------------------------------------------------------ */

/* Builtin names, gaussian:<s2>, topic:<K>:<alpha>, random:<seed>, or a path. */
REDLAB_API redlab_status redlab_model_load(const char* token, double sigma2, redlab_model** out);
REDLAB_API redlab_status redlab_model_from_json(const char* text, redlab_model** out);
REDLAB_API void redlab_model_free(redlab_model* model);

/* Newline-separated builtin model names. */
REDLAB_API redlab_status redlab_model_builtin_names(char** out);
/* JSON array of {field, message, slack}; "[]" for a valid document. */
REDLAB_API redlab_status redlab_model_validate_json(const char* text, char** out);
REDLAB_API redlab_status redlab_model_to_json(const redlab_model* model, char** out);

REDLAB_API redlab_status redlab_model_id(const redlab_model* model, char** out);
REDLAB_API redlab_status redlab_model_odds(const redlab_model* model, double x, double z, double* out);
REDLAB_API redlab_status redlab_model_log_odds(const redlab_model* model, double x, double z, double* out);
REDLAB_API redlab_status redlab_model_mu(const redlab_model* model, double x, double* out);
REDLAB_API redlab_status redlab_model_cond_mean_z(const redlab_model* model, double z, double* out);
REDLAB_API redlab_status redlab_model_cond_mean_xz(const redlab_model* model, double x, double z, double* out);
REDLAB_API redlab_status redlab_model_redundancy(const redlab_model* model, double* eps_x, double* eps_z,
                                                 double* eps_mu);
/* Rows x, z, y of n draws, written to `rows` (length 3n). */
REDLAB_API redlab_status redlab_model_sample(const redlab_model* model, size_t n, uint64_t seed, double* rows);

/* ---- scorers and embeddings -------------------------------------------- */

REDLAB_API redlab_status redlab_scorer_oracle(const redlab_model* model, redlab_scale scale, redlab_scorer** out);
/* Row-major rows x cols table of scores on `scale`. */
REDLAB_API redlab_status redlab_scorer_table(const double* values, size_t rows, size_t cols, redlab_scale scale,
                                             redlab_scorer** out);
/* `model` may be null unless the document describes an oracle scorer. */
REDLAB_API redlab_status redlab_scorer_from_json(const char* text, const redlab_model* model, redlab_scorer** out);
REDLAB_API redlab_status redlab_scorer_to_json(const redlab_scorer* scorer, char** out);
REDLAB_API redlab_status redlab_scorer_eval(const redlab_scorer* scorer, double x, double z, double* out);
REDLAB_API void redlab_scorer_free(redlab_scorer* scorer);

/* m landmarks drawn from p_Z with the given scorer. */
REDLAB_API redlab_status redlab_embedding_landmark(const redlab_model* model, const redlab_scorer* scorer, size_t m,
                                                   uint64_t seed, redlab_embedding** out);
REDLAB_API redlab_status redlab_embedding_exact(const redlab_model* model, redlab_embedding** out);
REDLAB_API redlab_status redlab_embedding_probabilistic(const redlab_model* model, size_t m, uint64_t seed,
                                                        redlab_embedding** out);
REDLAB_API redlab_status redlab_embedding_from_json(const char* text, const redlab_model* model,
                                                    redlab_embedding** out);
REDLAB_API redlab_status redlab_embedding_to_json(const redlab_embedding* emb, char** out);
REDLAB_API redlab_status redlab_embedding_dim(const redlab_embedding* emb, size_t* out);
/* Writes dim values to `out`. */
REDLAB_API redlab_status redlab_embedding_embed(const redlab_embedding* emb, double x, double* out);
/* inf over w of E[(w . phi(X) - mu(X))^2]; exact on finite models. */
REDLAB_API redlab_status redlab_embedding_risk(const redlab_embedding* emb, const redlab_model* model, size_t n_eval,
                                               uint64_t seed, double* risk, double* se);
REDLAB_API void redlab_embedding_free(redlab_embedding* emb);

/* ---- bound formulas ---------------------------------------------------- */

REDLAB_API redlab_status redlab_mu_gap_bound(double eps_x, double eps_z, double* out);
REDLAB_API redlab_status redlab_landmark_block_bound(double variance, size_t m, double delta, double* out);
REDLAB_API redlab_status redlab_landmark_risk_bound(double eps_mu, double eps_lm, double* out);
/* g_max < 0 means unbounded; *available is set to 0 when the bound is unbounded. */
REDLAB_API redlab_status redlab_learned_landmark_bound(double eps_lm, double eps_opt, double g_max, double* out,
                                                       int* available);
REDLAB_API redlab_status redlab_direct_risk_bound(double ey2, double g_max, double eps_opt, double* out,
                                                  int* available);
REDLAB_API redlab_status redlab_gaussian_closed_forms(double sigma2, double* second_moment, double* direct_moment,
                                                     int* direct_available);
REDLAB_API redlab_status redlab_topic_closed_forms(size_t k, double alpha, double* second_moment,
                                                   double* fourth_moment);

/* ---- experiments ------------------------------------------------------- */

REDLAB_API redlab_status redlab_scenario_names(char** out);
REDLAB_API redlab_status redlab_config_default(const char* scenario, redlab_config** out);
/* `scenario` may be null when the file names its scenario. */
REDLAB_API redlab_status redlab_config_from_file(const char* path, const char* scenario, redlab_config** out);
/* Keys: models (comma separated), sigma2, m (comma separated), replicates,
 * delta, n_mc, validation, seed, out, levels, shift, alpha_draws. */
REDLAB_API redlab_status redlab_config_set(redlab_config* config, const char* key, const char* value);
REDLAB_API redlab_status redlab_config_output_dir(const redlab_config* config, char** out);
REDLAB_API redlab_status redlab_config_to_json(const redlab_config* config, char** out);
REDLAB_API void redlab_config_free(redlab_config* config);

REDLAB_API redlab_status redlab_run_experiment(const redlab_config* config, redlab_run** out);
REDLAB_API redlab_status redlab_run_row_count(const redlab_run* run, size_t* out);
REDLAB_API redlab_status redlab_run_violations(const redlab_run* run, size_t* out);
REDLAB_API redlab_status redlab_run_csv(const redlab_run* run, int timing, char** out);
REDLAB_API redlab_status redlab_run_json(const redlab_run* run, int timing, char** out);
REDLAB_API redlab_status redlab_run_summary(const redlab_run* run, int timing, char** out);
/* Writes report.csv, summary.txt and the plot (for sweeps) into `dir`. */
REDLAB_API redlab_status redlab_run_write(const redlab_run* run, const char* dir, int timing);
REDLAB_API void redlab_run_free(redlab_run* run);

/* SVG for the rows of `scenario` in a report.csv document. */
REDLAB_API redlab_status redlab_plot_csv(const char* csv_text, const char* scenario, char** out);
/* Least-squares slope of ln(median risk) on ln m for one model's rows. */
REDLAB_API redlab_status redlab_fit_slope_csv(const char* csv_text, const char* scenario, const char* model_id,
                                              double* slope, double* intercept, double* r2);

#ifdef __cplusplus
}
#endif

#endif /* REDLAB_H */
