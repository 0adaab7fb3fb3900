#ifndef ARKS_H
#define ARKS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum ArksStatus {
  ARKS_STATUS_OK = 0,
  ARKS_STATUS_NULL_POINTER = 1,
  ARKS_STATUS_INVALID_UTF8 = 2,
  ARKS_STATUS_CONFIG = 3,
  ARKS_STATUS_INVALID_ARGUMENT = 4,
  ARKS_STATUS_RUNTIME = 5,
  ARKS_STATUS_BUFFER_SIZE = 6,
  ARKS_STATUS_OUT_OF_RANGE = 7,
  ARKS_STATUS_PANIC = 8,
} ArksStatus;

typedef enum ArksRunState {
  ARKS_RUN_STATE_RUNNING = 0,
  ARKS_RUN_STATE_FINISHED = 1,
  ARKS_RUN_STATE_BLOWUP = 2,
} ArksRunState;

typedef enum ArksField {
  ARKS_FIELD_U = 0,
  ARKS_FIELD_V = 1,
  ARKS_FIELD_W = 2,
} ArksField;

/**
 * Opaque simulation handle.
 */
typedef struct ArksSimulation ArksSimulation;

/**
 * One diagnostics record; `e_legacy` is NaN when not defined.
 */
typedef struct ArksDiagnostics {
  double t;
  double mass;
  double min_u;
  double max_u;
  double entropy;
  double e;
  double f;
  double residual;
  double ckp_lower;
  double ckp_upper;
  double l1_u;
  double linf_u;
  double linf_v;
  double linf_w;
  double phi_star_v;
  double phi_star_w;
  double e_legacy;
} ArksDiagnostics;

typedef struct ArksParams {
  double chi;
  double xi;
  double alpha;
  double beta;
  double gamma;
  double delta;
  double d1;
  double d2;
} ArksParams;

/**
 * Regime report; optional values are NaN (or -1 for `lin2018`) when absent.
 */
typedef struct ArksRegime {
  double theta1;
  double theta2;
  double ratio;
  bool cond_main;
  bool cond_strict;
  bool lc5_diffusion;
  bool lc5_decay;
  double min_eig_a1;
  double min_eig_a2;
  double min_eig_a3;
  double mu2;
  double mu3;
  /**
   * 1 holds, 0 fails, -1 not applicable.
   */
  int32_t lin2018;
} ArksRegime;

typedef struct ArksDecayFit {
  double rate;
  double amplitude;
  double r_squared;
  double t_start;
  double t_end;
  size_t samples;
} ArksDecayFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next call into this library from the same thread.
 */
const char *arks_last_error(void);

/**
 * Creates a simulation from configuration text in the `key = value` format.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ArksStatus arks_simulation_new(const char *config, struct ArksSimulation **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `sim` must come from [`arks_simulation_new`] and not be used afterwards.
 */
void arks_simulation_free(struct ArksSimulation *sim);

/**
 * Integrates up to `target` (clamped to the configured end time), storing
 * every scheduled record. `state` receives whether the run has finished.
 *
 * # Safety
 * `sim` must be a live handle; `state` may be null.
 */
enum ArksStatus arks_simulation_advance(struct ArksSimulation *sim,
                                        double target,
                                        enum ArksRunState *state);

/**
 * # Safety
 * `sim` must be a live handle and `t` a valid pointer.
 */
enum ArksStatus arks_simulation_time(const struct ArksSimulation *sim, double *t);

/**
 * # Safety
 * `sim` must be a live handle; `nx`, `ny` valid pointers.
 */
enum ArksStatus arks_simulation_grid(const struct ArksSimulation *sim, size_t *nx, size_t *ny);

/**
 * Diagnostics of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum ArksStatus arks_simulation_diagnostics(const struct ArksSimulation *sim,
                                            struct ArksDiagnostics *out);

/**
 * Number of scheduled records stored so far.
 *
 * # Safety
 * `sim` must be a live handle and `count` a valid pointer.
 */
enum ArksStatus arks_simulation_record_count(const struct ArksSimulation *sim, size_t *count);

/**
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum ArksStatus arks_simulation_record(const struct ArksSimulation *sim,
                                       size_t index,
                                       struct ArksDiagnostics *out);

/**
 * Copies one field (row-major, `nx * ny` values) into `buf`.
 *
 * # Safety
 * `sim` must be a live handle and `buf` must hold `len` doubles.
 */
enum ArksStatus arks_simulation_copy_field(const struct ArksSimulation *sim,
                                           enum ArksField field,
                                           double *buf,
                                           size_t len);

/**
 * Regime conditions for `params`; pass `ubar <= 0` or NaN to skip the
 * mass-dependent ones.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum ArksStatus arks_classify(const struct ArksParams *params, double ubar, struct ArksRegime *out);

/**
 * Eigenvalues of the linearisation on a mode with Laplacian eigenvalue
 * `-k2`, sorted by descending real part.
 *
 * # Safety
 * `params` must be valid; `re` and `im` must each hold 3 doubles.
 */
enum ArksStatus arks_linearized_rates(const struct ArksParams *params,
                                      double ubar,
                                      double k2,
                                      double *re,
                                      double *im);

/**
 * Exponential fit over the trailing `window` fraction of `n` samples.
 *
 * # Safety
 * `t` and `v` must each hold `n` doubles; `out` must be valid.
 */
enum ArksStatus arks_fit_decay(const double *t,
                               const double *v,
                               size_t n,
                               double window,
                               struct ArksDecayFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARKS_H */
