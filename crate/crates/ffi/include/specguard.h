#ifndef SPECGUARD_H
#define SPECGUARD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_ARGUMENT = 2,
  SG_STATUS_DIMENSION_MISMATCH = 3,
  SG_STATUS_BOUND_UNDEFINED = 4,
  SG_STATUS_NUMERICAL = 5,
  SG_STATUS_PARSE = 6,
  SG_STATUS_BUFFER_TOO_SMALL = 7,
  SG_STATUS_PANIC = 8,
} SgStatus;

/**
 * Opaque model handle.
 */
typedef struct SgModel SgModel;

/**
 * Opaque streaming threshold monitor.
 */
typedef struct SgMonitor SgMonitor;

/**
 * Detection metrics derived from a confusion matrix.
 */
typedef struct SgMetrics {
  double precision;
  double recall;
  double f1;
  double fpr;
  /**
   * No positive predictions; `precision` is reported as 0.
   */
  bool precision_undefined;
} SgMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into the library on the same thread.
 */
const char *sg_last_error_message(void);

/**
 * Dense power method on a row-major `n x n` matrix with `k` iterations.
 *
 * # Safety
 * `data` must point to `n * n` readable doubles and `out_rho` to one
 * writable double.
 */
enum SgStatus sg_power_method(const double *data,
                              size_t n,
                              size_t k,
                              uint64_t seed,
                              double *out_rho);

/**
 * Exact spectral radius of a row-major `n x n` matrix.
 *
 * # Safety
 * As for [`sg_power_method`].
 */
enum SgStatus sg_spectral_radius(const double *data, size_t n, double *out_rho);

/**
 * Memory-horizon bound in tokens. `out_vacuous` is set when the bound
 * collapses to zero; `SG_STATUS_BOUND_UNDEFINED` is returned for rho >= 1.
 *
 * # Safety
 * `out_tokens` and `out_vacuous` must be writable.
 */
enum SgStatus sg_horizon_bound(double rho,
                               double kappa,
                               double h0_norm,
                               double epsilon,
                               double lambda_max,
                               double *out_tokens,
                               bool *out_vacuous);

double sg_lipschitz_certificate(double a_norm, double delta_max);

/**
 * # Safety
 * `out` must be writable.
 */
enum SgStatus sg_metrics_from_counts(uint64_t tn,
                                     uint64_t fp,
                                     uint64_t fn_,
                                     uint64_t tp,
                                     struct SgMetrics *out);

/**
 * Default-sized toy model initialised from `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SgStatus sg_model_new(uint64_t seed, struct SgModel **out);

/**
 * Model from serialized weights.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum SgStatus sg_model_from_json(const char *json, struct SgModel **out);

/**
 * # Safety
 * `model` must come from `sg_model_new`/`sg_model_from_json` or be NULL.
 */
void sg_model_free(struct SgModel *model);

/**
 * # Safety
 * `model` must be a live handle; output pointers may be NULL.
 */
enum SgStatus sg_model_dims(const struct SgModel *model,
                            size_t *n_layers,
                            size_t *d_state,
                            size_t *vocab_size);

/**
 * Runs `tokens` through the model and writes the probed radius of every
 * (token, layer) pair, token-major, into `out_rho`. `capacity` must be at
 * least `n_tokens * n_layers`.
 *
 * # Safety
 * `tokens` must point to `n_tokens` readable values and `out_rho` to
 * `capacity` writable doubles.
 */
enum SgStatus sg_model_run(const struct SgModel *model,
                           const uint32_t *tokens,
                           size_t n_tokens,
                           size_t power_iters,
                           double *out_rho,
                           size_t capacity);

/**
 * Windowed threshold monitor; blocks while the minimum of the last
 * `window` radii is below `rho_min`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SgStatus sg_monitor_new(double rho_min, size_t window, struct SgMonitor **out);

/**
 * Feeds one per-token radius. `out_block` receives the decision and
 * `out_window_min` (may be NULL) the current window minimum.
 *
 * # Safety
 * `monitor` must be a live handle and `out_block` writable.
 */
enum SgStatus sg_monitor_push(struct SgMonitor *monitor,
                              double rho,
                              bool *out_block,
                              double *out_window_min);

/**
 * # Safety
 * `monitor` must come from `sg_monitor_new` or be NULL.
 */
void sg_monitor_free(struct SgMonitor *monitor);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECGUARD_H */
