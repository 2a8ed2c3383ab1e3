#ifndef SYMFLOW_H
#define SYMFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of grid points of [`symflow_det_sweep`].
 */
#define SYMFLOW_DET_SWEEP_LEN 201

typedef enum SymflowBackProjection {
  SYMFLOW_BACK_PROJECTION_EXACT = 0,
  SYMFLOW_BACK_PROJECTION_APPROXIMATED = 1,
  SYMFLOW_BACK_PROJECTION_NONE = 2,
} SymflowBackProjection;

typedef enum SymflowPreset {
  SYMFLOW_PRESET_SPACED = 0,
  SYMFLOW_PRESET_NEARBY = 1,
} SymflowPreset;

typedef enum SymflowRule {
  SYMFLOW_RULE_TWJ2S = 0,
  SYMFLOW_RULE_N2S = 1,
  SYMFLOW_RULE_M2S = 2,
  SYMFLOW_RULE_OJA = 3,
  SYMFLOW_RULE_NL = 4,
  SYMFLOW_RULE_NSE = 5,
} SymflowRule;

/**
 * Result codes.
 */
typedef enum SymflowStatus {
  SYMFLOW_STATUS_OK = 0,
  SYMFLOW_STATUS_NULL_POINTER = 1,
  SYMFLOW_STATUS_DIMENSION = 2,
  SYMFLOW_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Non-finite estimate or singular Gram matrix during integration.
   */
  SYMFLOW_STATUS_DIVERGENCE = 4,
  /**
   * Singular matrix, failed eigensolver or asymmetric input.
   */
  SYMFLOW_STATUS_NUMERICAL = 5,
  SYMFLOW_STATUS_PANIC = 6,
} SymflowStatus;

/**
 * Covariance model with a known spectrum.
 */
typedef struct SymflowModel SymflowModel;

/**
 * Error trace of one simulation.
 */
typedef struct SymflowTrace SymflowTrace;

/**
 * One sampled row of a trace.
 */
typedef struct SymflowTraceRow {
  uint64_t step;
  double e_o;
  double e_p;
} SymflowTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *symflow_version(void);

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *symflow_last_error(void);

/**
 * Model with a preset spectrum and an eigenbasis drawn from `seed`
 * (the same draw as `symflow run --seed`).
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum SymflowStatus symflow_model_new_preset(enum SymflowPreset preset,
                                            uint64_t seed,
                                            struct SymflowModel **out);

/**
 * Model with `n` strictly decreasing positive eigenvalues.
 *
 * # Safety
 * `lambdas` must point to `n` doubles and `out` to a handle slot.
 */
enum SymflowStatus symflow_model_new_custom(const double *lambdas,
                                            uintptr_t n,
                                            uint64_t seed,
                                            struct SymflowModel **out);

/**
 * # Safety
 * `model` must come from a `symflow_model_new_*` call and not be freed
 * already; NULL is ignored.
 */
void symflow_model_free(struct SymflowModel *model);

/**
 * Dimension `n` of the model, 0 for NULL.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
uintptr_t symflow_model_dim(const struct SymflowModel *model);

/**
 * Copies the `n×n` covariance matrix into `out`.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold `n*n` doubles.
 */
enum SymflowStatus symflow_model_covariance(const struct SymflowModel *model, double *out);

/**
 * Integrates `rule` on `model` from the seeded starting point and returns
 * the sampled trace. `alpha` is used by M2S only.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid handle slot.
 */
enum SymflowStatus symflow_simulate(const struct SymflowModel *model,
                                    enum SymflowRule rule,
                                    double alpha,
                                    uintptr_t m,
                                    enum SymflowBackProjection backprojection,
                                    double gamma,
                                    uint64_t steps,
                                    uint64_t subsample,
                                    uint64_t seed,
                                    struct SymflowTrace **out);

/**
 * Number of rows, 0 for NULL.
 *
 * # Safety
 * `trace` must be a live handle or NULL.
 */
uintptr_t symflow_trace_len(const struct SymflowTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle and `out` a valid row pointer.
 */
enum SymflowStatus symflow_trace_row(const struct SymflowTrace *trace,
                                     uintptr_t index,
                                     struct SymflowTraceRow *out);

/**
 * # Safety
 * `trace` must come from [`symflow_simulate`] and not be freed already;
 * NULL is ignored.
 */
void symflow_trace_free(struct SymflowTrace *trace);

/**
 * Right-hand side of `rule` at `W` (`n×m`) for covariance `C` (`n×n`),
 * written to `out` (`n×m`).
 *
 * # Safety
 * `w`, `c` and `out` must hold `n*m`, `n*n` and `n*m` doubles.
 */
enum SymflowStatus symflow_rule_rhs(enum SymflowRule rule,
                                    double alpha,
                                    const double *w,
                                    uintptr_t n,
                                    uintptr_t m,
                                    const double *c,
                                    double *out);

/**
 * `e₁` of the `m×m` matrix `x`.
 *
 * # Safety
 * `x` must hold `m*m` doubles and `out` must be writable.
 */
enum SymflowStatus symflow_e1(const double *x, uintptr_t m, double *out);

/**
 * `e₂` of the `m×m` matrix `x`.
 *
 * # Safety
 * As for [`symflow_e1`].
 */
enum SymflowStatus symflow_e2(const double *x, uintptr_t m, double *out);

/**
 * `e₂′` of the `m×m` matrix `x`.
 *
 * # Safety
 * As for [`symflow_e1`].
 */
enum SymflowStatus symflow_e2_prime(const double *x, uintptr_t m, double *out);

/**
 * `det{D′_α}` for α = 0.0, 0.1, …, 20.0 with a random `10×m` `Ā` drawn
 * from `seed`. Writes 201 determinants to `dets` and the number of sign
 * changes to `crossings` (may be NULL).
 *
 * # Safety
 * `dets` must hold `len` doubles.
 */
enum SymflowStatus symflow_det_sweep(uint64_t seed,
                                     uintptr_t m,
                                     double *dets,
                                     uintptr_t len,
                                     uintptr_t *crossings);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYMFLOW_H */
