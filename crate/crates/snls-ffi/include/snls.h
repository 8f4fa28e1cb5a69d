#ifndef SNLS_H
#define SNLS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SnlsStatus {
  SNLS_STATUS_OK = 0,
  SNLS_STATUS_NULL_POINTER = 1,
  SNLS_STATUS_INVALID_ARGUMENT = 2,
  SNLS_STATUS_BUFFER_TOO_SMALL = 3,
  SNLS_STATUS_COMPUTATION = 4,
  SNLS_STATUS_PANIC = 5,
} SnlsStatus;

// Perturbative solution `F_0..F_K` for one nonlinearity.
typedef struct SnlsExpansion SnlsExpansion;

// Lattice with its propagator, ready for kernel evaluations.
typedef struct SnlsLattice SnlsLattice;

// Smooth bump test function on a lattice.
typedef struct SnlsBump {
  double center_t;
  double center_x;
  double radius_t;
  double radius_x;
  // Fraction of the radius on which the bump equals one.
  double plateau;
  double amplitude;
} SnlsBump;

typedef struct SnlsComplex {
  double re;
  double im;
} SnlsComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *snls_version(void);

// Copies the last error message of this thread into `buf`. Returns the
// size needed including the terminator.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
uintptr_t snls_last_error(char *buf, uintptr_t cap);

// Expands the solution of the `|ψ|^{2κ}ψ` equation through order `order`.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum SnlsStatus snls_expand(uint32_t kappa, uint32_t order, struct SnlsExpansion **out);

// # Safety
// `h` must be null or a handle from [`snls_expand`] not yet freed.
void snls_expansion_free(struct SnlsExpansion *h);

// Highest expanded order `K`.
//
// # Safety
// `h` must be a live expansion handle and `out` writable.
enum SnlsStatus snls_expansion_order(const struct SnlsExpansion *h, uint32_t *out);

// Number of monomials in `F_k`.
//
// # Safety
// `h` must be a live expansion handle and `out` writable.
enum SnlsStatus snls_expansion_term_count(const struct SnlsExpansion *h,
                                          uint32_t k,
                                          uintptr_t *out);

// `F_k` in display form. On `BUFFER_TOO_SMALL`, `out_len` holds the size
// needed.
//
// # Safety
// `h` must be a live handle, `buf` null or `cap` writable bytes, `out_len`
// null or writable.
enum SnlsStatus snls_expansion_coefficient(const struct SnlsExpansion *h,
                                           uint32_t k,
                                           char *buf,
                                           uintptr_t cap,
                                           uintptr_t *out_len);

// `F_k` as JSON, same buffer protocol as [`snls_expansion_coefficient`].
//
// # Safety
// As for [`snls_expansion_coefficient`].
enum SnlsStatus snls_expansion_coefficient_json(const struct SnlsExpansion *h,
                                                uint32_t k,
                                                char *buf,
                                                uintptr_t cap,
                                                uintptr_t *out_len);

// Whether `E[ψ]` vanishes through order `k`.
//
// # Safety
// `h` must be a live handle and `out` writable.
enum SnlsStatus snls_mean_vanishes(const struct SnlsExpansion *h, uint32_t k, bool *out);

// Number of distinct two-point diagrams through order `k`.
//
// # Safety
// `h` must be a live handle and `out` writable.
enum SnlsStatus snls_two_point_diagram_count(const struct SnlsExpansion *h,
                                             uint32_t k,
                                             uintptr_t *out);

// Whether power counting finds finitely many divergent graphs through
// `k_max` in dimension `d`.
//
// # Safety
// `out` must be writable.
enum SnlsStatus snls_subcritical(uint32_t d, uint32_t kappa, uint32_t k_max, bool *out);

// Reference `d = 1` lattice on `[0,1] × [0,2π)` with `nt × nx` points.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum SnlsStatus snls_lattice_new(uintptr_t nt, uintptr_t nx, struct SnlsLattice **out);

// # Safety
// `h` must be null or a handle from [`snls_lattice_new`] not yet freed.
void snls_lattice_free(struct SnlsLattice *h);

// Lattice covariance `Q(f₁⊗f₂)` of the linear solution.
//
// # Safety
// `lat` must be a live lattice handle; `f1`, `f2` readable; `out` writable.
enum SnlsStatus snls_q_pair(const struct SnlsLattice *lat,
                            const struct SnlsBump *f1,
                            const struct SnlsBump *f2,
                            struct SnlsComplex *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNLS_H */
