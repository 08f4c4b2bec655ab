#ifndef SAMLAB_H
#define SAMLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SamlabStatus {
  SAMLAB_STATUS_OK = 0,
  SAMLAB_STATUS_NULL_POINTER = 1,
  SAMLAB_STATUS_INVALID_ARGUMENT = 2,
  SAMLAB_STATUS_DIMENSION_MISMATCH = 3,
  SAMLAB_STATUS_NON_FINITE = 4,
  // The ascent direction is undefined at a zero gradient.
  SAMLAB_STATUS_UNDEFINED = 5,
  SAMLAB_STATUS_NON_CONVERGENT = 6,
  SAMLAB_STATUS_EIGENGAP = 7,
  SAMLAB_STATUS_CONFIG = 8,
  SAMLAB_STATUS_PANIC = 9,
} SamlabStatus;

typedef enum SamlabAlgorithm {
  SAMLAB_ALGORITHM_GD = 0,
  SAMLAB_ALGORITHM_SAM = 1,
  SAMLAB_ALGORITHM_ONE_SAM = 2,
  SAMLAB_ALGORITHM_ASC_GD = 3,
} SamlabAlgorithm;

typedef enum SamlabSharpness {
  SAMLAB_SHARPNESS_MAX = 0,
  SAMLAB_SHARPNESS_ASC = 1,
  SAMLAB_SHARPNESS_AVG = 2,
} SamlabSharpness;

// Opaque loss handle.
typedef struct SamlabLoss SamlabLoss;

// Limiting regularizers at a manifold point.
typedef struct SamlabRegularizers {
  double s_max;
  double s_asc;
  double s_avg;
  double trace_half;
  size_t rank;
} SamlabRegularizers;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *samlab_last_error(void);

// Static version string.
const char *samlab_version(void);

// `L(x) = ½ xᵀAx` for a symmetric row-major `n × n` matrix `a`.
//
// # Safety
// `a` must point to `n * n` doubles and `out` to a writable handle slot.
enum SamlabStatus samlab_loss_quadratic(const double *a, size_t n, struct SamlabLoss **out);

// The four-dimensional toy loss.
//
// # Safety
// `out` must point to a writable handle slot.
enum SamlabStatus samlab_loss_toy4d(struct SamlabLoss **out);

// Loss from the TOML loss-file format.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable handle slot.
enum SamlabStatus samlab_loss_from_toml(const char *text, struct SamlabLoss **out);

// Releases a handle. NULL is ignored.
//
// # Safety
// `loss` must come from a samlab constructor and not be used afterwards.
void samlab_loss_free(struct SamlabLoss *loss);

// Dimension of the loss, or 0 for NULL.
//
// # Safety
// `loss` must be NULL or a live handle.
size_t samlab_loss_dim(const struct SamlabLoss *loss);

// Number of per-datum components, or 0 for NULL.
//
// # Safety
// `loss` must be NULL or a live handle.
size_t samlab_loss_components(const struct SamlabLoss *loss);

// Value and gradient at `x`. `grad` may be NULL.
//
// # Safety
// `x` and `grad` must hold `n` doubles, `value` one.
enum SamlabStatus samlab_loss_evaluate(const struct SamlabLoss *loss,
                                       const double *x,
                                       size_t n,
                                       double *value,
                                       double *grad);

// Row-major Hessian at `x` into `out` (`n * n` doubles).
//
// # Safety
// `x` must hold `n` doubles and `out` `n * n`.
enum SamlabStatus samlab_loss_hessian(const struct SamlabLoss *loss,
                                      const double *x,
                                      size_t n,
                                      double *out);

// One step from `x` into `out`. `datum` selects the component for one-SAM
// and is ignored otherwise.
//
// # Safety
// `x` and `out` must hold `n` doubles.
enum SamlabStatus samlab_step(const struct SamlabLoss *loss,
                              enum SamlabAlgorithm alg,
                              double eta,
                              double rho,
                              size_t datum,
                              const double *x,
                              size_t n,
                              double *out);

// `n_steps` steps from `x0`; the final iterate goes to `out`. One-SAM draws
// its data from a SplitMix64 stream seeded with `seed`.
//
// # Safety
// `x0` and `out` must hold `n` doubles.
enum SamlabStatus samlab_run(const struct SamlabLoss *loss,
                             enum SamlabAlgorithm alg,
                             double eta,
                             double rho,
                             uint64_t seed,
                             uint64_t n_steps,
                             const double *x0,
                             size_t n,
                             double *out);

// Eigenvalues (non-increasing) and row-major eigenvectors, one per row, of a
// symmetric `n × n` matrix. `vectors` may be NULL.
//
// # Safety
// `a` and `vectors` must hold `n * n` doubles, `values` `n`.
enum SamlabStatus samlab_eig_sym(const double *a, size_t n, double *values, double *vectors);

// Limit point `Φ(x)` of gradient flow from `x`, with default tolerances.
//
// # Safety
// `x` and `out` must hold `n` doubles.
enum SamlabStatus samlab_phi(const struct SamlabLoss *loss, const double *x, size_t n, double *out);

// Sharpness of the given type at radius `rho`. `n_samples` and `seed` are
// used by the average type only; `stderr` may be NULL and is set to 0 for
// the deterministic types. The ascent type returns `SAMLAB_STATUS_UNDEFINED`
// at a zero gradient.
//
// # Safety
// `x` must hold `n` doubles; `value` and `stderr` one each.
enum SamlabStatus samlab_sharpness(const struct SamlabLoss *loss,
                                   enum SamlabSharpness kind,
                                   const double *x,
                                   size_t n,
                                   double rho,
                                   size_t n_samples,
                                   uint64_t seed,
                                   double *value,
                                   double *stderr);

// `λ₁/2`, `λ_M/2`, `Tr/(2D)` and `Tr/2` of the Hessian at `p`.
//
// # Safety
// `p` must hold `n` doubles and `out` one struct.
enum SamlabStatus samlab_limiting_regularizers(const struct SamlabLoss *loss,
                                               const double *p,
                                               size_t n,
                                               double rank_tol,
                                               struct SamlabRegularizers *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAMLAB_H */
