#ifndef BOTTLENECKLAB_H
#define BOTTLENECKLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BlStatus {
  BL_STATUS_OK = 0,
  BL_STATUS_NULL_POINTER = 1,
  BL_STATUS_INVALID_UTF8 = 2,
  BL_STATUS_INVALID_ARGUMENT = 3,
  BL_STATUS_MODEL_NOT_FOUND = 4,
  BL_STATUS_CONFIG_INVALID = 5,
  /**
   * A hypothesis of the theorem failed (fixed point, partition condition, locality).
   */
  BL_STATUS_HYPOTHESIS_VIOLATED = 6,
  /**
   * Requested size exceeds an enumeration or memory cap.
   */
  BL_STATUS_TOO_LARGE = 7,
  BL_STATUS_NUMERICAL = 8,
  BL_STATUS_IO = 9,
  /**
   * Run finished but some assertion failed; artifacts were written.
   */
  BL_STATUS_ASSERTION_FAILED = 10,
  BL_STATUS_PANIC = 11,
  BL_STATUS_OTHER = 12,
} BlStatus;

/**
 * A registry model with its Hamiltonian.
 */
typedef struct BlModel BlModel;

typedef struct BlBottleneckResult {
  double delta;
  double numerator;
  double denominator;
  double lhs;
  double bound;
  double condition_residual;
  double tmix_lower;
  /**
   * Partition radius used.
   */
  uint32_t r;
  bool holds;
} BlBottleneckResult;

typedef struct BlClassicalResult {
  double lhs;
  double bound;
  double pi_a;
  double pi_b;
  double pi_c;
  double condition_residual;
  bool holds;
} BlClassicalResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * call into this library from the same thread.
 */
const char *bl_last_error_message(void);

/**
 * Static version string.
 */
const char *bl_version(void);

/**
 * Builds a model from a registry name such as `"ising_ring(6)"` or `"steane7"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum BlStatus bl_model_new(const char *name, struct BlModel **out);

/**
 * # Safety
 * `model` must come from `bl_model_new` and not be freed twice. NULL is ignored.
 */
void bl_model_free(struct BlModel *model);

/**
 * Number of qubits, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
uint32_t bl_model_num_qubits(const struct BlModel *model);

/**
 * Local bottleneck check for the Metropolis sweep at inverse temperature
 * `beta`, with A the Pauli ball of radius `inner` around the reference
 * eigenstate. `radius < 0` uses the sweep's locality.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum BlStatus bl_verify_local(const struct BlModel *model,
                              double beta,
                              uint32_t inner,
                              int32_t radius,
                              struct BlBottleneckResult *out);

/**
 * Classical check for lazy Glauber dynamics on a classical model, with A the
 * Hamming ball of radius `inner` around all-zeros and single-flip shells.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum BlStatus bl_verify_classical(const struct BlModel *model,
                                  double beta,
                                  double laziness,
                                  uint32_t inner,
                                  struct BlClassicalResult *out);

/**
 * Runs a subcommand (`"verify-quantum"`, `"stability-sweep"`, ...) from a
 * JSON config and writes artifacts to `out_dir`. `jobs == 0` picks the
 * default worker count. Returns `AssertionFailed` when the run completed
 * with violations.
 *
 * # Safety
 * All string arguments must be NUL-terminated.
 */
enum BlStatus bl_run(const char *subcommand,
                     const char *config_json,
                     const char *out_dir,
                     uint32_t jobs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOTTLENECKLAB_H */
