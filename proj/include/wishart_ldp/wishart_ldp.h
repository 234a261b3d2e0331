#ifndef WISHART_LDP_H
#define WISHART_LDP_H

/* C interface to the wishart_ldp library.
 *
 * Every function returns a wldp_status; on failure a message for the calling
 * thread is available from wldp_last_error() until the next call. Matrices are
 * dense row-major m*m arrays of double. Strings returned through char** are
 * owned by the caller and released with wldp_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(WLDP_BUILDING_LIBRARY)
#define WLDP_API __attribute__((visibility("default")))
#else
#define WLDP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wldp_status {
  WLDP_OK = 0,
  WLDP_INVALID_ARGUMENT = 1,
  WLDP_INDEFINITE_INPUT = 2,
  WLDP_SINGULAR_PENCIL = 3,
  WLDP_BAD_INITIAL_CONDITION = 4,
  WLDP_DEGENERATE_PATH = 5,
  WLDP_DOMAIN_ERROR = 6,
  WLDP_BLOW_UP = 7,
  WLDP_PARSE_ERROR = 8,
  WLDP_IO_ERROR = 9,
  WLDP_INTERNAL_ERROR = 100
} wldp_status;

typedef enum wldp_verdict { WLDP_VERDICT_PASS = 0, WLDP_VERDICT_FAIL = 1, WLDP_VERDICT_COMPLETE = 2 } wldp_verdict;

typedef struct wldp_config wldp_config;
typedef struct wldp_report wldp_report;

WLDP_API const char* wldp_version(void);
WLDP_API const char* wldp_status_string(wldp_status status);
WLDP_API const char* wldp_last_error(void);
WLDP_API void wldp_string_free(char* s);

/* Experiment configs: JSON or TOML text. Loading checks syntax only; the
 * experiment itself is validated by wldp_config_validate and wldp_run. */
WLDP_API wldp_status wldp_config_load_file(const char* path, wldp_config** out);
WLDP_API wldp_status wldp_config_load_text(const char* text, wldp_config** out);
WLDP_API wldp_status wldp_config_new(const char* kind, wldp_config** out);
/* Sets a dotted key such as "sim.m" or "payload.radius"; value is JSON text
 * ("2", "0.5", "[0.5, 0.25]", "\"EULER_CLAMP\""). */
WLDP_API wldp_status wldp_config_set(wldp_config* cfg, const char* key, const char* json_value);
WLDP_API wldp_status wldp_config_validate(const wldp_config* cfg);
WLDP_API wldp_status wldp_config_output_path(const wldp_config* cfg, char** out);
WLDP_API wldp_status wldp_config_to_json(const wldp_config* cfg, char** out);
WLDP_API void wldp_config_free(wldp_config* cfg);

/* include_timestamp = 0 produces byte-identical reports for identical configs. */
WLDP_API wldp_status wldp_run(const wldp_config* cfg, int include_timestamp, wldp_report** out);
WLDP_API wldp_status wldp_report_verdict(const wldp_report* rep, wldp_verdict* out);
WLDP_API wldp_status wldp_report_json(const wldp_report* rep, char** out);
WLDP_API wldp_status wldp_report_summary(const wldp_report* rep, char** out);
/* Empty string when the experiment has no tabular series. */
WLDP_API wldp_status wldp_report_csv(const wldp_report* rep, char** out);
WLDP_API void wldp_report_free(wldp_report* rep);

/* Direct numeric entry points. */
WLDP_API wldp_status wldp_solve_sylvester(int m, const double* a, const double* b, double* x);
WLDP_API wldp_status wldp_rate_K(int m, const double* M, double delta, double* out);
WLDP_API wldp_status wldp_rate_K_max(double a, double delta, int m, double* out);
/* E exp(-Tr(X_T Theta)) for the unit-noise Wishart process started at x,
 * through the Riccati equation with an atom 2 Theta at T. */
WLDP_API wldp_status wldp_laplace_atom(int m, const double* theta, const double* x, double delta, double horizon,
                                       size_t steps, double* out);

#ifdef __cplusplus
}
#endif

#endif
