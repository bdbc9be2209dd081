#ifndef BINARYKIN_H
#define BINARYKIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum BkStatus {
  BK_STATUS_OK = 0,
  BK_STATUS_NULL_POINTER = 1,
  /**
   * Wrong length, range or configuration.
   */
  BK_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Non-finite values, failed factorization or no convergence.
   */
  BK_STATUS_NUMERICAL = 3,
  /**
   * Dense storage budget exceeded.
   */
  BK_STATUS_SIZING = 4,
  /**
   * Input outside the mathematical domain (e.g. nonpositive F for entropy).
   */
  BK_STATUS_DOMAIN = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  BK_STATUS_PANIC = 6,
} BkStatus;

/**
 * Assembled linearized operator with its invariant basis.
 */
typedef struct BkLinearized BkLinearized;

/**
 * Velocity grid plus precomputed collision quadrature.
 */
typedef struct BkOperator BkOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static NUL-terminated string.
 */
const char *bk_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated,
 * always NUL-terminated when `cap > 0`). Returns the full message length.
 */
size_t bk_last_error(char *buf, size_t cap);

/**
 * Post-collision velocities for masses `(m_a, m_b)`; `omega` need not be
 * normalized. All arrays hold three values.
 */
enum BkStatus bk_post_collision(double m_a,
                                double m_b,
                                const double *v,
                                const double *v_star,
                                const double *omega,
                                double *v_out,
                                double *v_star_out);

/**
 * Builds an operator on `points_per_axis^3` velocity nodes with
 * `|cos theta|` angular kernel. `radius <= 0` selects `6/sqrt(min mass)`.
 */
enum BkStatus bk_operator_new(double m_a,
                              double m_b,
                              double gamma,
                              size_t points_per_axis,
                              double radius,
                              size_t sphere_points,
                              struct BkOperator **out);

void bk_operator_free(struct BkOperator *op);

/**
 * Number of velocity nodes, 0 for a null handle.
 */
size_t bk_operator_len(const struct BkOperator *op);

/**
 * Node coordinates, `3 * len` values in node order.
 */
enum BkStatus bk_operator_nodes(const struct BkOperator *op, double *out, size_t len);

/**
 * `Q^{ab}(F^a, F^b)` on the grid; species indices are 0 (A) or 1 (B).
 */
enum BkStatus bk_eval_q(const struct BkOperator *op,
                        const double *f_alpha,
                        const double *f_beta,
                        uint32_t alpha,
                        uint32_t beta,
                        double *out,
                        size_t len);

/**
 * Entropy production of the positive pair `(F^A, F^B)`.
 */
enum BkStatus bk_entropy_production(const struct BkOperator *op,
                                    const double *f_a,
                                    const double *f_b,
                                    size_t len,
                                    double *out);

/**
 * Assembles the linearized operator (dense, `2 len` square).
 */
enum BkStatus bk_linearized_new(const struct BkOperator *op, struct BkLinearized **out);

void bk_linearized_free(struct BkLinearized *lin);

/**
 * `L f` for a stacked `(f^A, f^B)` of length `2 * nodes`.
 */
enum BkStatus bk_linearized_apply(const struct BkLinearized *lin,
                                  const double *f,
                                  double *out,
                                  size_t len);

/**
 * Coercivity constant and the minimizer's largest normalized
 * `nu`-inner product with an invariant.
 */
enum BkStatus bk_coercivity(const struct BkLinearized *lin,
                            uint64_t seed,
                            double *delta_hat,
                            double *orthogonality);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BINARYKIN_H */
