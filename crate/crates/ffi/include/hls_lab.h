#ifndef HLS_LAB_H
#define HLS_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HlsStatus {
  HLS_STATUS_OK = 0,
  HLS_STATUS_NULL_POINTER = 1,
  HLS_STATUS_DOMAIN = 2,
  HLS_STATUS_OVERFLOW = 3,
  HLS_STATUS_QUADRATURE = 4,
  HLS_STATUS_CUTOFF = 5,
  HLS_STATUS_NUMERICAL = 6,
  HLS_STATUS_SCHEMA = 7,
  HLS_STATUS_IO = 8,
  HLS_STATUS_INVALID_STRING = 9,
  HLS_STATUS_BUFFER_TOO_SMALL = 10,
  HLS_STATUS_PANIC = 11,
} HlsStatus;

// Spectral context on the sphere: parameters, cutoff and quadrature.
typedef struct HlsContext HlsContext;

// Zonal function sampled at the nodes of its context.
typedef struct HlsZonal HlsZonal;

typedef struct HlsProjection {
  // Scale of the nearest extremizer; zero when degenerate.
  double c;
  double tau;
  double hs_distance_sq;
  double lp_distance;
  bool degenerate;
} HlsProjection;

typedef struct HlsFlowRecord {
  size_t k;
  double lp_norm;
  double quadratic_form;
  double distance_to_target;
  double residual_norm;
} HlsFlowRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *hls_last_error(void);

// Library version as a static NUL-terminated string.
const char *hls_version(void);

// Sharp HLS constant for `(n, s)`.
//
// # Safety
// `out` must be valid for writing one `double`.
enum HlsStatus hls_sharp_constant(size_t n, double s, double *out);

// Multiplier `A(l)` of the spectral operator on degree-`l` harmonics.
//
// # Safety
// `out` must be valid for writing one `double`.
enum HlsStatus hls_multiplier(size_t n, double s, size_t l, double *out);

// Context with spectral cutoff `l` and `q` quadrature nodes (`q > l`).
//
// # Safety
// `out` must be valid for writing one pointer. Release the handle with
// `hls_context_free`.
enum HlsStatus hls_context_new(size_t n, double s, size_t l, size_t q, struct HlsContext **out);

// Releases a context. Functions created from it stay valid.
//
// # Safety
// `ctx` must be null or a handle from `hls_context_new` not yet freed.
void hls_context_free(struct HlsContext *ctx);

// Number of quadrature nodes.
//
// # Safety
// `ctx` must be a live context and `out` valid for one `size_t`.
enum HlsStatus hls_context_size(const struct HlsContext *ctx, size_t *out);

// Copies the node heights `t_i` into `buf`.
//
// # Safety
// `ctx` must be a live context and `buf` valid for `len` doubles.
enum HlsStatus hls_context_nodes(const struct HlsContext *ctx, double *buf, size_t len);

// Zonal function from its values at the context nodes.
//
// # Safety
// `ctx` must be a live context, `values` valid for `len` doubles and `out`
// valid for one pointer. Release the handle with `hls_zonal_free`.
enum HlsStatus hls_zonal_from_nodal(const struct HlsContext *ctx,
                                    const double *values,
                                    size_t len,
                                    struct HlsZonal **out);

// Zonal function from coefficients in the orthonormal zonal basis.
//
// # Safety
// As for `hls_zonal_from_nodal`.
enum HlsStatus hls_zonal_from_coefficients(const struct HlsContext *ctx,
                                           const double *coeffs,
                                           size_t len,
                                           struct HlsZonal **out);

// Loads a JSON profile; radial profiles are lifted onto `q` nodes.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid for one pointer.
enum HlsStatus hls_zonal_load(const char *path, size_t q, struct HlsZonal **out);

// # Safety
// `z` must be null or a live zonal handle.
void hls_zonal_free(struct HlsZonal *z);

// Number of nodal values.
//
// # Safety
// `z` must be a live zonal handle and `out` valid for one `size_t`.
enum HlsStatus hls_zonal_size(const struct HlsZonal *z, size_t *out);

// Copies the nodal values into `buf`.
//
// # Safety
// `z` must be a live zonal handle and `buf` valid for `len` doubles.
enum HlsStatus hls_zonal_values(const struct HlsZonal *z, double *buf, size_t len);

// `||g||_p^2 - <P g, g>`.
//
// # Safety
// `z` must be a live zonal handle and `out` valid for one `double`.
enum HlsStatus hls_hls_deficit(const struct HlsZonal *z, double *out);

// `<E u, u> - ||u||_q^2`.
//
// # Safety
// `z` must be a live zonal handle and `out` valid for one `double`.
enum HlsStatus hls_sobolev_deficit(const struct HlsZonal *z, double *out);

// `deficit(1 + r) / ||r||_p^2`.
//
// # Safety
// `r` must be a live zonal handle and `out` valid for one `double`.
enum HlsStatus hls_local_stability_ratio(const struct HlsZonal *r, double *out);

// Nearest point of the extremizer manifold in the H^{-s} metric.
//
// # Safety
// `g` must be a live zonal handle and `out` valid for one `HlsProjection`.
enum HlsStatus hls_project(const struct HlsZonal *g, struct HlsProjection *out);

// Residuals of the Legendre identity and of the deficit transfer for the
// dual density of `f`.
//
// # Safety
// `f` must be a live zonal handle; `legendre` and `transfer` must each be
// valid for one `double`.
enum HlsStatus hls_duality_residuals(const struct HlsZonal *f, double *legendre, double *transfer);

// Runs `iters` competing-symmetries steps from the nonnegative lift `g` and
// writes `iters + 1` records.
//
// # Safety
// `g` must be a live zonal handle and `records` valid for `len` records.
enum HlsStatus hls_flow(const struct HlsZonal *g,
                        size_t iters,
                        struct HlsFlowRecord *records,
                        size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HLS_LAB_H */
