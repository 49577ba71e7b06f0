/* srcfit: source identification for second order elliptic equations by
 * p-continuation of softened sup-norm functionals.
 *
 * C interface of the shared library. Experiments are opaque handles; all
 * entry points return a status code and never throw across the boundary.
 * Handles are not thread safe individually, but distinct handles may be
 * used from different threads concurrently.
 */
#ifndef SRCFIT_H
#define SRCFIT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum srcfit_status {
  SRCFIT_OK = 0,
  SRCFIT_ERR_ARGUMENT = 1, /* null pointer or out-of-range argument */
  SRCFIT_ERR_CONFIG = 2,   /* configuration rejected; message available */
  SRCFIT_ERR_IO = 3,       /* file could not be read or written */
  SRCFIT_ERR_RUN = 4,      /* a pipeline stage failed; message available */
  SRCFIT_ERR_INTERNAL = 5
} srcfit_status;

/* Per-rung diagnostics, mirroring one row of results.csv. */
typedef struct srcfit_rung_stats {
  double p;
  int32_t iterations;
  int32_t converged;
  double energy_p;
  double energy_inf;
  double grad_sup;
  double sup_error_on_K;
  double lp_error_on_K;
  double sup_F;
  double tv_nu;
  double tv_mu;
  double concentration_fraction;
  double el_residual;
  double bound_rhs_p;  /* NaN when no exact solution is available */
  int32_t bound_pass;  /* 1 pass, 0 fail, -1 not applicable */
  double c2_dist_prev_rung; /* NaN on the first rung */
} srcfit_rung_stats;

typedef struct srcfit_experiment srcfit_experiment;

const char* srcfit_version(void);

/* Parses and validates a configuration file without running it. On
 * rejection, writes a message naming the offending key into err (if err is
 * non-null and err_len > 0). */
srcfit_status srcfit_validate_config(const char* config_path, char* err,
                                     size_t err_len);

/* Echoes the validated configuration with defaults filled in, as text.
 * Returns the number of bytes required (excluding the terminator); the
 * output is truncated to buf_len. */
srcfit_status srcfit_render_config(const char* config_path, char* buf,
                                   size_t buf_len, size_t* required);

/* Creates an experiment from a configuration file. The handle owns a copy
 * of the configuration; the file is not needed afterwards. */
srcfit_status srcfit_experiment_open(const char* config_path,
                                     srcfit_experiment** out, char* err,
                                     size_t err_len);

/* Optional overrides, applied before srcfit_experiment_run. */
srcfit_status srcfit_experiment_set_output_dir(srcfit_experiment* exp,
                                               const char* dir);
srcfit_status srcfit_experiment_set_seed(srcfit_experiment* exp,
                                         uint64_t seed);

/* Runs the pipeline and writes results.csv, report.json, config_echo.cfg
 * and the fields/ directory into the output directory. Returns
 * SRCFIT_ERR_RUN if a stage failed; partial outputs are still written and
 * the message is available from srcfit_experiment_last_error. */
srcfit_status srcfit_experiment_run(srcfit_experiment* exp);

const char* srcfit_experiment_last_error(const srcfit_experiment* exp);
const char* srcfit_experiment_output_dir(const srcfit_experiment* exp);

/* Number of completed ladder rungs (valid after run). */
int srcfit_experiment_rung_count(const srcfit_experiment* exp);
srcfit_status srcfit_experiment_rung_stats(const srcfit_experiment* exp,
                                           int rung,
                                           srcfit_rung_stats* out);

void srcfit_experiment_close(srcfit_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif /* SRCFIT_H */
