/* C ABI for the evolop laboratory.
 *
 * All entry points are thread-compatible: distinct handles may be used from
 * distinct threads; a single handle must not be shared without external
 * synchronization. Strings returned as `char*` are owned by the caller and
 * must be released with evolop_string_free(). Handles are opaque and must
 * be released with evolop_run_free().
 */

#ifndef EVOLOP_H
#define EVOLOP_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Opaque run handle: configuration plus, after evolop_run(), the report. */
typedef struct EvolopRun EvolopRun;

/* Status codes mirror the CLI exit contract. */
typedef enum EvolopStatus {
  EVOLOP_OK = 0,
  /* invalid argument (null pointer, bad UTF-8, unknown name) */
  EVOLOP_ERR_ARGUMENT = 1,
  /* configuration or expression error */
  EVOLOP_ERR_CONFIG = 2,
  /* numerical failure or failed checks */
  EVOLOP_ERR_NUMERIC = 3,
} EvolopStatus;

/* Library version as a static string (do not free). */
const char *evolop_version(void);

/* Parse a JSON experiment configuration into a run handle.
 * Returns NULL on error; *err_out (optional) then carries a message the
 * caller must free with evolop_string_free(). */
EvolopRun *evolop_run_new(const char *config_json, char **err_out);

/* Load the configuration from a file path instead. */
EvolopRun *evolop_run_from_path(const char *config_path, char **err_out);

/* Execute a subcommand: one of "validate", "lyapunov", "solve", "kernel",
 * "tightness", "measures", "spectrum", "decay", "mc", "all".
 * `out_dir` (optional, may be NULL) overrides the config's output
 * directory; artifacts (report.json, CSV, SVG) are written there.
 * `seed` overrides the Monte Carlo seed when nonnegative.
 * Returns EVOLOP_OK iff every enabled check passed. */
int evolop_run(EvolopRun *run, const char *subcommand, const char *out_dir,
               int64_t seed);

/* JSON report of the last evolop_run() call, or NULL if none.
 * Free with evolop_string_free(). */
char *evolop_report_json(const EvolopRun *run);

/* Message of the last error on this handle ("" if none).
 * Free with evolop_string_free(). */
char *evolop_last_error(const EvolopRun *run);

/* --- expression utilities ------------------------------------------- */

/* Evaluate an expression at (t, x1, x2). Returns EVOLOP_OK and writes
 * *value_out on success; EVOLOP_ERR_CONFIG for parse errors and
 * EVOLOP_ERR_NUMERIC for evaluation errors (log/sqrt domain, overflow),
 * with *err_out (optional) carrying the message. */
int evolop_expr_eval(const char *source, double t, double x1, double x2,
                     double *value_out, char **err_out);

/* Symbolic derivative with respect to "t", "x1" or "x2"; returns the
 * printed derivative (free with evolop_string_free()) or NULL on error. */
char *evolop_expr_derivative(const char *source, const char *var,
                             char **err_out);

/* --- memory --------------------------------------------------------- */

void evolop_run_free(EvolopRun *run);
void evolop_string_free(char *s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EVOLOP_H */
