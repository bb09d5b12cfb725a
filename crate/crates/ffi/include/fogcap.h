#ifndef FOGCAP_H
#define FOGCAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FogMethodKind {
  FOG_METHOD_KIND_GD1 = 0,
  FOG_METHOD_KIND_QLE = 1,
  FOG_METHOD_KIND_SIM = 2,
} FogMethodKind;

typedef enum FogStatus {
  FOG_STATUS_OK = 0,
  FOG_STATUS_NULL_POINTER = 1,
  FOG_STATUS_INVALID_PARAMETER = 2,
  FOG_STATUS_DOMAIN = 3,
  /**
   * G/D/1 evaluated where the shallow service is below the mean input.
   */
  FOG_STATUS_VALIDITY = 4,
  /**
   * Autocovariance yields a non-positive aggregate variance.
   */
  FOG_STATUS_MODEL = 5,
  FOG_STATUS_RANGE = 6,
  FOG_STATUS_PARSE = 7,
  FOG_STATUS_EMPTY_INPUT = 8,
  FOG_STATUS_IO = 9,
  FOG_STATUS_PANIC = 10,
} FogStatus;

/**
 * Opaque scenario under construction: budget, deadline and cloudlet models.
 */
typedef struct FogScenario FogScenario;

/**
 * Estimator selection. Fields not used by `kind` are ignored.
 */
typedef struct FogMethod {
  enum FogMethodKind kind;
  /**
   * Largest aggregation window scanned by the G/D/1 estimator.
   */
  size_t n_max;
  /**
   * Autocovariance lags used by the G/D/1 estimator.
   */
  size_t max_lag;
  /**
   * Queue-estimate shift as a multiple of each cloudlet's standard deviation.
   */
  double kappa_coeff;
  size_t n_slots;
  uint64_t seed;
} FogMethod;

typedef struct FogSimResult {
  double alpha;
  double avg_loss;
  double loss_probability;
  double std_err;
  double conservation_residual;
} FogSimResult;

typedef struct FogOptimizeResult {
  double alpha_star;
  double objective;
  size_t iterations;
  bool feasible;
} FogOptimizeResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or NULL. Valid until the next call
 * into this library from the same thread.
 */
const char *fog_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fog_version(void);

/**
 * Default settings for an estimator kind (G/D/1: n_max 10000, 256 lags;
 * queue estimate: kappa 0; simulation: 10^6 slots, seed 1).
 */
struct FogMethod fog_method_default(enum FogMethodKind kind);

/**
 * Creates an empty scenario. Release it with `fog_scenario_free`.
 */
enum FogStatus fog_scenario_new(double budget, double deadline, struct FogScenario **out);

/**
 * Releases a scenario. NULL is ignored.
 */
void fog_scenario_free(struct FogScenario *s);

enum FogStatus fog_scenario_add_gaussian(struct FogScenario *s, double mean, double variance);

/**
 * AR(1) cloudlet whose stationary variance is `variance`.
 */
enum FogStatus fog_scenario_add_ar1(struct FogScenario *s,
                                    double mean,
                                    double variance,
                                    double phi);

enum FogStatus fog_scenario_add_uniform(struct FogScenario *s, double low, double high);

/**
 * Cloudlet driven by a `timestamp_s,count` request trace.
 */
enum FogStatus fog_scenario_add_trace(struct FogScenario *s,
                                      const char *path,
                                      uint64_t bucket_s,
                                      double cycles_per_task);

enum FogStatus fog_scenario_set_deadline(struct FogScenario *s, double deadline);

enum FogStatus fog_scenario_num_cloudlets(const struct FogScenario *s, size_t *out);

/**
 * Fluid simulation at one split.
 */
enum FogStatus fog_simulate(const struct FogScenario *s,
                            double alpha,
                            size_t n_slots,
                            uint64_t seed,
                            struct FogSimResult *out);

/**
 * Sum over cloudlets of the expected per-slot overflow at `alpha`.
 */
enum FogStatus fog_expected_overflow(const struct FogScenario *s,
                                     double alpha,
                                     const struct FogMethod *method,
                                     double *out);

/**
 * Expected overflow divided by the deep capacity `C - alpha`.
 */
enum FogStatus fog_fractional_objective(const struct FogScenario *s,
                                        double alpha,
                                        const struct FogMethod *method,
                                        double *out);

/**
 * Iterative ratio search for the split. `thresholds` may be NULL; otherwise
 * it holds one loss-probability cap per cloudlet.
 */
enum FogStatus fog_algorithm1(const struct FogScenario *s,
                              const struct FogMethod *method,
                              double epsilon_step,
                              size_t grid_points,
                              const double *thresholds,
                              struct FogOptimizeResult *out);

/**
 * Interval of `alpha` where the G/D/1 objective is certified convex.
 * `hi_open` is set when the interval is clipped at the budget.
 */
enum FogStatus fog_convexity_range(const struct FogScenario *s,
                                   double *lo,
                                   double *hi,
                                   bool *hi_open);

/**
 * `E(X - t)+` for `X ~ N(mean, variance)`.
 */
enum FogStatus fog_stop_loss_gaussian(double mean, double variance, double t, double *out);

/**
 * `E(X - t)+` for `X ~ U[low, high]`.
 */
enum FogStatus fog_stop_loss_uniform(double low, double high, double t, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOGCAP_H */
