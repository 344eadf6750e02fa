#ifndef QRHD_H
#define QRHD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QrhdStatus {
  QRHD_STATUS_OK = 0,
  QRHD_STATUS_NULL_POINTER = 1,
  QRHD_STATUS_INVALID_UTF8 = 2,
  QRHD_STATUS_BUFFER_TOO_SMALL = 3,
  QRHD_STATUS_CONFIG = 4,
  QRHD_STATUS_PARAMETER = 5,
  QRHD_STATUS_DOMAIN = 6,
  QRHD_STATUS_NUMERIC = 7,
  QRHD_STATUS_IO = 8,
  QRHD_STATUS_PANIC = 9,
} QrhdStatus;

typedef enum QrhdPole {
  QRHD_POLE_NORTH = 0,
  QRHD_POLE_SOUTH = 1,
} QrhdPole;

/**
 * Opaque chart handle.
 */
typedef struct QrhdChart QrhdChart;

/**
 * Opaque parsed experiment.
 */
typedef struct QrhdExperiment QrhdExperiment;

/**
 * Opaque result of one evolution.
 */
typedef struct QrhdTrace QrhdTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `capacity`. Returns the full message length in bytes.
 *
 * # Safety
 * `buffer` must point to `capacity` writable bytes or be null.
 */
size_t qrhd_last_error(char *buffer, size_t capacity);

/**
 * Flat chart on the box `[lo, hi]` of dimension `dim`.
 *
 * # Safety
 * `lo` and `hi` must hold `dim` values; `out` must be writable.
 */
enum QrhdStatus qrhd_chart_flat(size_t dim,
                                const double *lo,
                                const double *hi,
                                struct QrhdChart **out);

/**
 * Constant-metric chart; `metric` is `dim × dim`, row-major, symmetric
 * positive definite.
 *
 * # Safety
 * `metric` must hold `dim²` values, `lo` and `hi` `dim` each.
 */
enum QrhdStatus qrhd_chart_constant(size_t dim,
                                    const double *metric,
                                    const double *lo,
                                    const double *hi,
                                    struct QrhdChart **out);

/**
 * Stereographic chart of the sphere of `radius` in `R^ambient_dim`, on the
 * default box `[−radius, radius]^(ambient_dim−1)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QrhdStatus qrhd_chart_sphere(enum QrhdPole pole,
                                  size_t ambient_dim,
                                  double radius,
                                  struct QrhdChart **out);

/**
 * # Safety
 * `chart` must come from a `qrhd_chart_*` constructor and not be used after.
 */
void qrhd_chart_free(struct QrhdChart *chart);

/**
 * Chart dimension, or 0 for a null handle.
 *
 * # Safety
 * `chart` must be a live handle or null.
 */
size_t qrhd_chart_dim(const struct QrhdChart *chart);

/**
 * Ricci scalar at `point`.
 *
 * # Safety
 * `point` must hold `qrhd_chart_dim(chart)` values.
 */
enum QrhdStatus qrhd_chart_ricci_scalar(const struct QrhdChart *chart,
                                        const double *point,
                                        double *out);

/**
 * Christoffel symbols at `point` into `out[(k·n + i)·n + j] = Γ^k_{ij}`.
 *
 * # Safety
 * `point` must hold `n` values and `out` `capacity` writable values.
 */
enum QrhdStatus qrhd_chart_christoffel(const struct QrhdChart *chart,
                                       const double *point,
                                       double *out,
                                       size_t capacity);

/**
 * Operator-ordering corrections `(ΔV, ΔV′)` for mass `mass`.
 *
 * # Safety
 * `point` must hold `n` values; outputs must be writable.
 */
enum QrhdStatus qrhd_chart_corrections(const struct QrhdChart *chart,
                                       const double *point,
                                       double mass,
                                       double *delta_v,
                                       double *delta_v_prime);

/**
 * Ambient point of a sphere-chart coordinate.
 *
 * # Safety
 * `point` must hold `n` values and `out` `capacity` writable values.
 */
enum QrhdStatus qrhd_chart_embed(const struct QrhdChart *chart,
                                 const double *point,
                                 double *out,
                                 size_t capacity);

/**
 * Parses and validates a TOML experiment description.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum QrhdStatus qrhd_experiment_from_toml(const char *toml, struct QrhdExperiment **out);

/**
 * # Safety
 * `experiment` must come from [`qrhd_experiment_from_toml`] and not be used after.
 */
void qrhd_experiment_free(struct QrhdExperiment *experiment);

/**
 * Number of charts in the experiment, or 0 for a null handle.
 *
 * # Safety
 * `experiment` must be a live handle or null.
 */
size_t qrhd_experiment_chart_count(const struct QrhdExperiment *experiment);

/**
 * Evolves the experiment's initial state on chart `chart_index`.
 *
 * # Safety
 * `experiment` must be a live handle; `out` must be writable.
 */
enum QrhdStatus qrhd_experiment_run(const struct QrhdExperiment *experiment,
                                    size_t chart_index,
                                    struct QrhdTrace **out);

/**
 * # Safety
 * `trace` must come from [`qrhd_experiment_run`] and not be used after.
 */
void qrhd_trace_free(struct QrhdTrace *trace);

/**
 * Number of recorded time steps, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be a live handle or null.
 */
size_t qrhd_trace_len(const struct QrhdTrace *trace);

/**
 * Coordinates per recorded position, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be a live handle or null.
 */
size_t qrhd_trace_dim(const struct QrhdTrace *trace);

/**
 * Sample times into `out`.
 *
 * # Safety
 * `out` must hold `capacity` writable values.
 */
enum QrhdStatus qrhd_trace_times(const struct QrhdTrace *trace, double *out, size_t capacity);

/**
 * `⟨x⟩(t)` row-major, `len × dim` values.
 *
 * # Safety
 * `out` must hold `capacity` writable values.
 */
enum QrhdStatus qrhd_trace_mean_position(const struct QrhdTrace *trace,
                                         double *out,
                                         size_t capacity);

/**
 * `max_t |‖ψ(t)‖ − 1|`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QrhdStatus qrhd_trace_max_norm_drift(const struct QrhdTrace *trace, double *out);

/**
 * Lower branch `W₋₁(z)` for `z ∈ [−1/e, 0)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QrhdStatus qrhd_lambert_w_minus1(double z, double *out);

/**
 * Critically damped lower bound on the convergence time and the friction
 * rate attaining it.
 *
 * # Safety
 * Outputs must be writable.
 */
enum QrhdStatus qrhd_convergence_bound(double lambda_eff,
                                       double eta,
                                       double mass,
                                       double epsilon_star,
                                       double *t_bound,
                                       double *gamma_opt);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QRHD_H */
