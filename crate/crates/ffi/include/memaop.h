#ifndef MEMAOP_H
#define MEMAOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MemaopStatus {
  MEMAOP_STATUS_OK = 0,
  MEMAOP_STATUS_NULL_POINTER = 1,
  MEMAOP_STATUS_INVALID_ARGUMENT = 2,
  MEMAOP_STATUS_DIMENSION_MISMATCH = 3,
  MEMAOP_STATUS_SELECTION = 4,
  MEMAOP_STATUS_NON_FINITE = 5,
  MEMAOP_STATUS_DATA = 6,
  MEMAOP_STATUS_DIVERGED = 7,
  MEMAOP_STATUS_IO = 8,
  MEMAOP_STATUS_PANIC = 9,
} MemaopStatus;

/**
 * Values accepted by the `policy` parameters.
 */
typedef enum MemaopPolicy {
  MEMAOP_POLICY_TOP_K = 0,
  MEMAOP_POLICY_RAND_K = 1,
  MEMAOP_POLICY_WEIGHTED_K = 2,
} MemaopPolicy;

/**
 * One layer's Mem-AOP memories, its configuration and selection RNG.
 */
typedef struct MemaopLayerState MemaopLayerState;

typedef struct MemaopMatrix MemaopMatrix;

typedef struct MemaopMemSgd MemaopMemSgd;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *memaop_last_error(void);

/**
 * Copies `rows * cols` doubles from `data` into a new matrix.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles; `out` must be writable.
 */
enum MemaopStatus memaop_matrix_new(size_t rows,
                                    size_t cols,
                                    const double *data,
                                    struct MemaopMatrix **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum MemaopStatus memaop_matrix_zeros(size_t rows, size_t cols, struct MemaopMatrix **out);

/**
 * # Safety
 * `m` must be NULL or a handle from this library that is not used afterwards.
 */
void memaop_matrix_free(struct MemaopMatrix *m);

/**
 * # Safety
 * `m` must be a live handle; `rows` and `cols` must be writable.
 */
enum MemaopStatus memaop_matrix_shape(const struct MemaopMatrix *m, size_t *rows, size_t *cols);

/**
 * Pointer to the row-major contents, valid while `m` is alive and
 * unmodified.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
const double *memaop_matrix_data(const struct MemaopMatrix *m);

/**
 * Copies the contents into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `m` must be a live handle; `buf` must have room for `len` doubles.
 */
enum MemaopStatus memaop_matrix_copy(const struct MemaopMatrix *m, double *buf, size_t len);

/**
 * `A · B` as a sum of outer products.
 *
 * # Safety
 * `a`, `b` must be live handles; `out` must be writable.
 */
enum MemaopStatus memaop_exact_matmul(const struct MemaopMatrix *a,
                                      const struct MemaopMatrix *b,
                                      struct MemaopMatrix **out);

/**
 * Approximate `A · B` from `k` outer products chosen by `policy`
 * (a [`MemaopPolicy`] value). `selected`, if not NULL, receives the number
 * of distinct outer products evaluated.
 *
 * # Safety
 * `a`, `b` must be live handles; `out` must be writable; `selected` may be NULL.
 */
enum MemaopStatus memaop_approx_matmul(const struct MemaopMatrix *a,
                                       const struct MemaopMatrix *b,
                                       uint32_t policy,
                                       size_t k,
                                       bool with_replacement,
                                       uint64_t seed,
                                       struct MemaopMatrix **out,
                                       size_t *selected);

/**
 * Zeroed memories for a `input_dim -> output_dim` layer trained on
 * batches of `batch_size` rows.
 *
 * # Safety
 * `out` must be writable.
 */
enum MemaopStatus memaop_layer_state_new(size_t batch_size,
                                         size_t input_dim,
                                         size_t output_dim,
                                         uint32_t policy,
                                         size_t k,
                                         bool with_replacement,
                                         double learning_rate,
                                         bool use_memory,
                                         uint64_t seed,
                                         struct MemaopLayerState **out);

/**
 * # Safety
 * `s` must be NULL or a handle from this library that is not used afterwards.
 */
void memaop_layer_state_free(struct MemaopLayerState *s);

/**
 * One Mem-AOP update of `w` (`input_dim x output_dim`, modified in place)
 * from batch input `x` and output gradient `g`. `outer_products`, if not
 * NULL, receives the number evaluated.
 *
 * # Safety
 * All handles must be live and distinct; `outer_products` may be NULL.
 */
enum MemaopStatus memaop_layer_state_step(struct MemaopLayerState *s,
                                          struct MemaopMatrix *w,
                                          const struct MemaopMatrix *x,
                                          const struct MemaopMatrix *g,
                                          size_t *outer_products);

/**
 * Copy of the input memory (`batch_size x input_dim`).
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum MemaopStatus memaop_layer_state_mem_x(const struct MemaopLayerState *s,
                                           struct MemaopMatrix **out);

/**
 * Copy of the gradient memory (`batch_size x output_dim`).
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum MemaopStatus memaop_layer_state_mem_g(const struct MemaopLayerState *s,
                                           struct MemaopMatrix **out);

/**
 * Top-`k` sparsification with error feedback over `rows x cols` gradients.
 *
 * # Safety
 * `out` must be writable.
 */
enum MemaopStatus memaop_memsgd_new(size_t rows, size_t cols, size_t k, struct MemaopMemSgd **out);

/**
 * # Safety
 * `s` must be NULL or a handle from this library that is not used afterwards.
 */
void memaop_memsgd_free(struct MemaopMemSgd *s);

/**
 * Feeds `grad`, returns the sparse update to apply in `out`.
 *
 * # Safety
 * `s`, `grad` must be live handles; `out` must be writable.
 */
enum MemaopStatus memaop_memsgd_step(struct MemaopMemSgd *s,
                                     const struct MemaopMatrix *grad,
                                     struct MemaopMatrix **out);

/**
 * Copy of the residual memory.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum MemaopStatus memaop_memsgd_memory(const struct MemaopMemSgd *s, struct MemaopMatrix **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEMAOP_H */
