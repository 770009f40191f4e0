#ifndef ABF_H
#define ABF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum AbfStatus {
  ABF_STATUS_OK = 0,
  ABF_STATUS_NULL_POINTER = 1,
  ABF_STATUS_INVALID_ARGUMENT = 2,
  ABF_STATUS_CONFIG = 3,
  ABF_STATUS_DIMENSION = 4,
  ABF_STATUS_DIVERGED = 5,
  ABF_STATUS_UNCONVERGED = 6,
  ABF_STATUS_IO = 7,
  ABF_STATUS_VIOLATION = 8,
  ABF_STATUS_PANIC = 9,
} AbfStatus;

typedef enum AbfMethod {
  ABF_METHOD_ABF = 0,
  ABF_METHOD_ABF_SC = 1,
  ABF_METHOD_FISTA = 2,
  ABF_METHOD_FISTA_SC = 3,
  ABF_METHOD_PG = 4,
} AbfMethod;

// Opaque problem instance.
typedef struct AbfInstance AbfInstance;

// Opaque completed (or diverged) run.
typedef struct AbfRun AbfRun;

// One trajectory row. Quantities that do not apply to the method are NaN.
typedef struct AbfRecord {
  size_t k;
  double f_gap;
  double eta;
  double psi;
  double energy;
  double bound;
  double residual_y;
  double residual_z;
  double grad_drift;
  double y_increment;
} AbfRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *abf_last_error(void);

// Library version as a static NUL-terminated string.
const char *abf_version(void);

// Random quadratic `½xᵀAx − bᵀx` with spectrum in `[1/cond, 1]`, plus
// `l1_weight·‖x‖₁` when `l1_weight > 0`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum AbfStatus abf_instance_quadratic(size_t dimension,
                                      double condition_number,
                                      uint64_t seed,
                                      double l1_weight,
                                      struct AbfInstance **out);

// Random lasso `½‖Mx − b‖² + reg_weight·‖x‖₁` with `M` of size
// `rows × cols`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum AbfStatus abf_instance_lasso(size_t rows,
                                  size_t cols,
                                  double reg_weight,
                                  uint64_t seed,
                                  struct AbfInstance **out);

// Instance from a JSON document or a short form such as
// `lasso:rows=20,cols=40,reg=0.5,seed=7`.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum AbfStatus abf_instance_parse(const char *text, struct AbfInstance **out);

// # Safety
// `instance` must be null or a handle from an `abf_instance_*`
// constructor that has not been freed.
void abf_instance_free(struct AbfInstance *instance);

// Dimension, or 0 for a null handle.
//
// # Safety
// `instance` must be null or a live handle.
size_t abf_instance_dimension(const struct AbfInstance *instance);

// Lipschitz constant of `∇f`, or NaN for a null handle.
//
// # Safety
// `instance` must be null or a live handle.
double abf_instance_lipschitz(const struct AbfInstance *instance);

// Strong convexity modulus of `f`, or NaN for a null handle.
//
// # Safety
// `instance` must be null or a live handle.
double abf_instance_strong_convexity(const struct AbfInstance *instance);

// `F(x) = f(x) + g(x)`; `+inf` outside the domain of `g`.
//
// # Safety
// `x` must point to `len` doubles; `out` must be writable.
enum AbfStatus abf_instance_objective(const struct AbfInstance *instance,
                                      const double *x,
                                      size_t len,
                                      double *out);

// Reference minimizer and minimum (closed form or a tight proximal-gradient
// solve).
//
// # Safety
// `x_out` must point to `len` writable doubles; `minimum` must be
// writable.
enum AbfStatus abf_instance_reference(const struct AbfInstance *instance,
                                      double *x_out,
                                      size_t len,
                                      double *minimum);

// Runs `method` for `iterations` steps with `s = 1/L` and default
// schedule, recording every iteration.
//
// Returns `ABF_STATUS_DIVERGED` with a valid handle holding the partial
// trajectory when an iterate becomes non-finite.
//
// # Safety
// `instance` must be a live handle; `out` must be writable.
enum AbfStatus abf_run(const struct AbfInstance *instance,
                       enum AbfMethod method,
                       size_t iterations,
                       struct AbfRun **out);

// Runs with a JSON run configuration
// (`{"method", "max_iterations", "step", "schedule", "record_every", "stopping", "start"}`).
//
// # Safety
// `config_json` must be a NUL-terminated string; see [`abf_run`].
enum AbfStatus abf_run_with_config(const struct AbfInstance *instance,
                                   const char *config_json,
                                   struct AbfRun **out);

// # Safety
// `run` must be null or a handle from `abf_run*` that has not been freed.
void abf_run_free(struct AbfRun *run);

// Number of records, or 0 for a null handle.
//
// # Safety
// `run` must be null or a live handle.
size_t abf_run_record_count(const struct AbfRun *run);

// Whether the run stopped on a non-finite iterate.
//
// # Safety
// `run` must be null or a live handle.
bool abf_run_diverged(const struct AbfRun *run);

// Copies record `index` into `out`.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum AbfStatus abf_run_record(const struct AbfRun *run, size_t index, struct AbfRecord *out);

// Copies the final `x` iterate into `out` (`len` must equal the
// dimension).
//
// # Safety
// `out` must point to `len` writable doubles.
enum AbfStatus abf_run_final_x(const struct AbfRun *run, double *out, size_t len);

// Writes the trajectory CSV to `path` (write-then-rename).
//
// # Safety
// `path` must be a NUL-terminated string.
enum AbfStatus abf_run_write_csv(const struct AbfRun *run, const char *path);

// Evaluates every applicable trajectory certificate. Returns
// `ABF_STATUS_VIOLATION` when any fails; the failing check names are then
// in [`abf_last_error`]. `failed` (optional) receives the failure count.
//
// # Safety
// `run` must be a live handle; `failed` must be null or writable.
enum AbfStatus abf_run_verify(const struct AbfRun *run, size_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABF_H */
