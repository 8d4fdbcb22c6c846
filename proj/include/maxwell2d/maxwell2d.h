#ifndef MAXWELL2D_H
#define MAXWELL2D_H

#include <stddef.h>
#include <stdint.h>

#if defined(M2D_BUILDING_LIBRARY)
#define M2D_API __attribute__((visibility("default")))
#else
#define M2D_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. The first four double as CLI exit codes. */
typedef enum {
  M2D_OK = 0,
  M2D_CHECK_FAILED = 1,
  M2D_CONFIG_ERROR = 2,
  M2D_RUNTIME_ERROR = 3,
  M2D_INVALID_ARGUMENT = 4
} m2d_status;

typedef struct m2d_config m2d_config;
typedef struct m2d_report m2d_report;

M2D_API const char* m2d_version(void);
/* Message of the last failed call on this thread; empty when none. */
M2D_API const char* m2d_last_error(void);
/* Strings returned through char** outputs are owned by the caller. */
M2D_API void m2d_string_free(char* s);

/* Experiment ids and acceptance checks. */
M2D_API size_t m2d_experiment_count(void);
M2D_API const char* m2d_experiment_id(size_t i);
M2D_API size_t m2d_check_count(void);
M2D_API m2d_status m2d_check_info(size_t i, const char** id, int* criterion, const char** experiment,
                                  double* budget_seconds);

/* Configuration. */
M2D_API m2d_status m2d_config_default(const char* experiment, m2d_config** out);
M2D_API m2d_status m2d_config_from_json(const char* json, m2d_config** out);
M2D_API m2d_status m2d_config_from_file(const char* path, m2d_config** out);
/* Defaults for the experiment overlaid with the file at path (may be NULL). The file may omit "experiment". */
M2D_API m2d_status m2d_config_load(const char* experiment, const char* path, m2d_config** out);
/* Keys: "seed", "out", "lambda-list" ("16,32,64"), "pair" ("0.75,4,inf,2"), "kappa". */
M2D_API m2d_status m2d_config_set(m2d_config* cfg, const char* key, const char* value);
M2D_API m2d_status m2d_config_validate(const m2d_config* cfg);
M2D_API m2d_status m2d_config_to_json(const m2d_config* cfg, char** out);
M2D_API void m2d_config_free(m2d_config* cfg);

/* Runs the experiment. Returns M2D_OK with a report even when checks fail; see m2d_report_status. */
M2D_API m2d_status m2d_run(const m2d_config* cfg, m2d_report** out);
/* M2D_OK if every check passed, M2D_RUNTIME_ERROR if a check raised, M2D_CHECK_FAILED otherwise. */
M2D_API m2d_status m2d_report_status(const m2d_report* r);
M2D_API size_t m2d_report_check_count(const m2d_report* r);
M2D_API m2d_status m2d_report_check(const m2d_report* r, size_t i, const char** id, int* criterion, int* passed,
                                    double* seconds, int* within_budget);
/* One-line summary of the check's measured values and tolerances. */
M2D_API m2d_status m2d_report_check_summary(const m2d_report* r, size_t i, char** out);
M2D_API m2d_status m2d_report_to_json(const m2d_report* r, int with_timing, char** out);
M2D_API m2d_status m2d_report_write(const m2d_report* r, const char* dir);
M2D_API void m2d_report_free(m2d_report* r);

/* Direct entry points. */
/* 0 sharp, 1 non-sharp, 2 invalid. */
M2D_API m2d_status m2d_strichartz_classify(double rho, double p, double q, int n, int* out);
/* sigma = (2 - s)/(2 + s), delta = 2/(2 + s) for s in [0, 2]. */
M2D_API m2d_status m2d_sigma_delta(double s, double* sigma, double* delta);
/* ||m d m^-1 - p||_F / ||p||_F for constant eps^-1 = (a11, a12, a22) at xi = (xi0, xi1, xi2). */
M2D_API m2d_status m2d_diagonalization_residual(const double eps_inv[3], const double xi[3], double* out);

#ifdef __cplusplus
}
#endif

#endif
