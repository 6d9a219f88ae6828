/* ppreg: penalized log-linear intensity estimation for spatial point
 * processes. C interface over opaque handles; every function returning
 * ppreg_status leaves a message for ppreg_last_error() on failure. Strings
 * returned through char** are owned by the caller and released with
 * ppreg_string_free(). JSON documents follow the layouts described in
 * README.md. */
#ifndef PPREG_PPREG_H
#define PPREG_PPREG_H

#include <stddef.h>
#include <stdint.h>

#if defined(PPREG_BUILDING_LIBRARY)
#define PPREG_API __attribute__((visibility("default")))
#else
#define PPREG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ppreg_status {
  PPREG_OK = 0,
  PPREG_ERR_USAGE = 1,       /* invalid argument or configuration */
  PPREG_ERR_DATA = 2,        /* unreadable or inconsistent input data */
  PPREG_ERR_NUMERICAL = 3,   /* divergence, singular matrix, no converged fit */
  PPREG_ERR_DOMAIN = 4,      /* argument outside a function's domain */
  PPREG_ERR_UNSUPPORTED = 5, /* valid request the library cannot compute */
  PPREG_ERR_INTERNAL = 6
} ppreg_status;

typedef struct ppreg_pattern ppreg_pattern;
typedef struct ppreg_covariates ppreg_covariates;
typedef struct ppreg_fit ppreg_fit;

PPREG_API const char* ppreg_version(void);
/* Message of the last failed call on this thread ("" if none). */
PPREG_API const char* ppreg_last_error(void);
PPREG_API void ppreg_string_free(char* s);

/* Config documents: TOML text to JSON, and defaults/unknown-key checks for a
 * command (simulate, fit, path, se, study, surface). */
PPREG_API ppreg_status ppreg_config_parse_toml(const char* text, char** out_json);
PPREG_API ppreg_status ppreg_config_resolve(const char* command, const char* user_json, char** out_json);
/* Sets a dotted key ("penalty.kind") in a JSON object; value_text is read as
 * JSON when it parses, else taken as a string. */
PPREG_API ppreg_status ppreg_config_set(const char* config_json, const char* key, const char* value_text,
                                        char** out_json);

/* Covariates: every *.asc grid (and *.csv grid with a JSON sidecar) in dir. */
PPREG_API ppreg_status ppreg_covariates_load_dir(const char* dir, int mean_impute, ppreg_covariates** out);
PPREG_API ppreg_status ppreg_covariates_count(const ppreg_covariates* covs, size_t* out);
/* window = {x_min, x_max, y_min, y_max} */
PPREG_API ppreg_status ppreg_covariates_window(const ppreg_covariates* covs, double window[4]);
PPREG_API void ppreg_covariates_free(ppreg_covariates* covs);

PPREG_API ppreg_status ppreg_pattern_read_csv(const char* path, const double window[4], ppreg_pattern** out);
PPREG_API ppreg_status ppreg_pattern_write_csv(const ppreg_pattern* pattern, const char* path);
PPREG_API ppreg_status ppreg_pattern_size(const ppreg_pattern* pattern, size_t* out);
PPREG_API ppreg_status ppreg_pattern_point(const ppreg_pattern* pattern, size_t i, double* x, double* y);
PPREG_API void ppreg_pattern_free(ppreg_pattern* pattern);

/* config_json: resolved "simulate" config. */
PPREG_API ppreg_status ppreg_simulate(const ppreg_covariates* covs, const char* config_json, uint64_t seed,
                                      ppreg_pattern** out);

/* config_json: resolved "fit" config. */
PPREG_API ppreg_status ppreg_fit_run(const ppreg_pattern* pattern, const ppreg_covariates* covs,
                                     const char* config_json, ppreg_fit** out);
PPREG_API ppreg_status ppreg_fit_to_json(const ppreg_fit* fit, char** out_json);
PPREG_API ppreg_status ppreg_fit_from_json(const char* json, ppreg_fit** out);
PPREG_API ppreg_status ppreg_fit_converged(const ppreg_fit* fit, int* out);
PPREG_API ppreg_status ppreg_fit_coefficients(const ppreg_fit* fit, double* beta, size_t capacity, size_t* n);
PPREG_API void ppreg_fit_free(ppreg_fit* fit);

/* config_json: resolved "path" config. */
PPREG_API ppreg_status ppreg_path_run(const ppreg_pattern* pattern, const ppreg_covariates* covs,
                                      const char* config_json, char** out_json);
PPREG_API ppreg_status ppreg_select(const char* path_json, char** out_json);

/* config_json: resolved "se" config. */
PPREG_API ppreg_status ppreg_standard_errors(const ppreg_fit* fit, const ppreg_covariates* covs,
                                             const char* config_json, char** out_json);

/* Fitted intensity at every covariate cell, written as an ESRI ASCII grid. */
PPREG_API ppreg_status ppreg_surface_write(const ppreg_fit* fit, const ppreg_covariates* covs,
                                           const char* path);

/* config_json: resolved "study" config. threads = 0 means 1. out_csv holds
 * the report table; out_summary_json (optional) the per-kappa mean point
 * counts and the wall-clock runtime. */
PPREG_API ppreg_status ppreg_study_run(const char* config_json, uint64_t seed, unsigned threads,
                                       char** out_csv, char** out_summary_json);

#ifdef __cplusplus
}
#endif

#endif /* PPREG_PPREG_H */
