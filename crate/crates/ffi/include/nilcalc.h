#ifndef NILCALC_H
#define NILCALC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NcStatus {
  NC_STATUS_OK = 0,
  NC_STATUS_NULL_POINTER = 1,
  // bad input: unknown name, malformed JSON, wrong dimensions, grid too coarse
  NC_STATUS_INVALID = 2,
  // singular η, ambiguous spectrum, failed fit
  NC_STATUS_NUMERICAL = 3,
  NC_STATUS_IO = 4,
  // caller's buffer is too small; the required size was written back
  NC_STATUS_BUFFER_TOO_SMALL = 5,
  NC_STATUS_PANIC = 6,
} NcStatus;

// A 2-step stratified group.
typedef struct NcGroup NcGroup;

// Kernel samples on a centred grid over 𝔤₁ × 𝔤₂.
typedef struct NcKernel NcKernel;

// A spectral multiplier F(λ).
typedef struct NcMultiplier NcMultiplier;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread. `*len` holds the capacity of
// `buf` on entry and the required size (including NUL) on exit.
//
// # Safety
// `buf` must be writable for `*len` bytes; `len` must be valid.
enum NcStatus nc_last_error(char *buf, size_t *len);

// Library version as a static NUL-terminated string.
const char *nc_version(void);

// Built-in group by name ("H1", "H2", "N32", "G37D", "HTYPE3", "37A-graph").
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be valid.
enum NcStatus nc_group_builtin(const char *name, struct NcGroup **out);

// Group from its JSON definition (1-based structure constants).
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid.
enum NcStatus nc_group_from_json(const char *json, struct NcGroup **out);

// # Safety
// `g` must come from `nc_group_*` and not be used afterwards; null is ignored.
void nc_group_free(struct NcGroup *g);

// First- and second-layer dimensions.
//
// # Safety
// All pointers must be valid.
enum NcStatus nc_group_dims(const struct NcGroup *g, size_t *d1, size_t *d2);

// Pfaffian class name ("37A", …, "37D₁", UTF-8) of a group with d1 = 4, d2 = 3;
// `buf`/`len` as in `nc_last_error`.
//
// # Safety
// `g` and `len` must be valid; `buf` writable for `*len` bytes.
enum NcStatus nc_group_classify(const struct NcGroup *g, char *buf, size_t *len);

// Distinct nonzero eigenvalues b_j of |J_η| (descending) with multiplicities
// r_j, and r₀ = dim ker J_η.
// `*count` holds the capacity of `b`/`r` on entry and the number of blocks on exit.
//
// # Safety
// `eta` readable for `n_eta` values; `b`, `r` writable for `*count`; others valid.
enum NcStatus nc_spectrum(const struct NcGroup *g,
                          const double *eta,
                          size_t n_eta,
                          double *b,
                          size_t *r,
                          size_t *count,
                          size_t *r0);

// Smooth bump supported in (a, b).
//
// # Safety
// `out` must be valid.
enum NcStatus nc_multiplier_bump(double a, double b, struct NcMultiplier **out);

// Heat multiplier e^{−tλ}.
//
// # Safety
// `out` must be valid.
enum NcStatus nc_multiplier_heat(double t, struct NcMultiplier **out);

// F(λ) ↦ F(sλ).
//
// # Safety
// `m` must be a valid multiplier handle.
enum NcStatus nc_multiplier_dilate(struct NcMultiplier *m, double s);

// # Safety
// `m` must come from `nc_multiplier_*` and not be used afterwards; null is ignored.
void nc_multiplier_free(struct NcMultiplier *m);

// V(ξ, η), the Fourier transform of the kernel in (x, u) at (ξ, η).
//
// # Safety
// `eta`/`xi` readable for d2/d1 values; other pointers valid.
enum NcStatus nc_eval_v(const struct NcMultiplier *m,
                        const struct NcGroup *g,
                        const double *eta,
                        const double *xi,
                        double *re,
                        double *im);

// Synthesize the convolution kernel of F(L) on a centred grid: `counts` and
// `spacings` hold d1 + d2 entries (x axes first). `nyquist_safety` ≤ 0 takes
// the default.
//
// # Safety
// `counts`/`spacings` readable for d1 + d2 entries; other pointers valid.
enum NcStatus nc_kernel_synthesize(const struct NcMultiplier *m,
                                   const struct NcGroup *g,
                                   const size_t *counts,
                                   const double *spacings,
                                   double nyquist_safety,
                                   struct NcKernel **out);

// Number of grid samples.
//
// # Safety
// Pointers must be valid.
enum NcStatus nc_kernel_len(const struct NcKernel *k, size_t *len);

// Copy the samples (row-major, last axis fastest) into `re`/`im`, each of capacity `cap`.
//
// # Safety
// `re`/`im` writable for `cap` values.
enum NcStatus nc_kernel_values(const struct NcKernel *k, double *re, double *im, size_t cap);

// Write the grid in NKG1 format to `path`.
//
// # Safety
// `k` valid; `path` NUL-terminated.
enum NcStatus nc_kernel_write_nkg1(const struct NcKernel *k, const char *path);

// # Safety
// `k` must come from `nc_kernel_synthesize` and not be used afterwards; null is ignored.
void nc_kernel_free(struct NcKernel *k);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NILCALC_H */
