#ifndef FREESUB_H
#define FREESUB_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum FsStatus {
  FS_STATUS_OK = 0,
  FS_STATUS_NULL_POINTER = 1,
  FS_STATUS_INVALID_ARGUMENT = 2,
  FS_STATUS_INVALID_MEASURE = 3,
  FS_STATUS_OUTSIDE_DOMAIN = 4,
  FS_STATUS_NO_CONVERGENCE = 5,
  // Quadrature, tail fit, series or moment failure.
  FS_STATUS_NUMERICAL = 6,
  FS_STATUS_IO = 7,
  FS_STATUS_BUFFER_TOO_SMALL = 8,
  FS_STATUS_PANIC = 9,
} FsStatus;

// Free convolution of two measures, with its diagnostics.
typedef struct FsConvolution FsConvolution;

// A probability measure on `[0, inf)`.
typedef struct FsMeasure FsMeasure;

// Grid layout used by the convolution routines.
typedef struct FsGridSpec {
  double x_max;
  uintptr_t nodes;
  double fit_decades;
  double linear_to;
} FsGridSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into the library from the same thread.
const char *fs_last_error(void);

// Library version as a static string.
const char *fs_version(void);

struct FsGridSpec fs_grid_spec_default(void);

// Parses a measure from `name:p1,p2` (e.g. `pareto:1.5,1`) or a JSON object.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` a valid pointer.
enum FsStatus fs_measure_parse(const char *spec, struct FsMeasure **out_measure);

// # Safety
// `m` must come from this library and not be used afterwards. Null is ignored.
void fs_measure_free(struct FsMeasure *m);

// Writes the label of `m` into `buf` (NUL-terminated). `needed` receives
// the required size including the terminator.
//
// # Safety
// `buf` must hold `len` bytes or be null with `len == 0`.
enum FsStatus fs_measure_label(const struct FsMeasure *m,
                               char *buf,
                               uintptr_t len,
                               uintptr_t *needed);

// `mu((y, inf))`.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_measure_tail(const struct FsMeasure *m, double y, double *value);

// Density at `x`, zero where none exists.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_measure_density(const struct FsMeasure *m, double x, double *value);

// Moment of order `j`, possibly infinite.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_measure_moment(const struct FsMeasure *m, uint32_t j, double *value);

// Tail index, or NaN for measures with bounded support.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_measure_tail_index(const struct FsMeasure *m, double *value);

// Cauchy transform `G(z)` for `Im z > 0`.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_cauchy(const struct FsMeasure *m,
                        double re,
                        double im,
                        double *out_re,
                        double *out_im);

// Voiculescu transform `phi(z)` on the cone where the inverse exists.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_voiculescu(const struct FsMeasure *m,
                            double re,
                            double im,
                            double *out_re,
                            double *out_im);

// `a boxplus b`. `spec` may be null for the default grid.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_convolve(const struct FsMeasure *a,
                          const struct FsMeasure *b,
                          const struct FsGridSpec *spec,
                          struct FsConvolution **out_result);

// `n`-fold free convolution power.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_free_power(const struct FsMeasure *m,
                            uint32_t n,
                            const struct FsGridSpec *spec,
                            struct FsConvolution **out_result);

// # Safety
// `r` must come from this library and not be used afterwards. Null is ignored.
void fs_convolution_free(struct FsConvolution *r);

// A new measure handle holding the result law.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_convolution_measure(const struct FsConvolution *r, struct FsMeasure **out_measure);

// Number of grid nodes, zero when the result is a point mass.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_convolution_len(const struct FsConvolution *r, uintptr_t *len);

// Copies nodes and density values into caller buffers of length `cap`.
//
// # Safety
// `x` and `f` must each hold `cap` doubles.
enum FsStatus fs_convolution_grid(const struct FsConvolution *r,
                                  double *x,
                                  double *f,
                                  uintptr_t cap);

// Mass defect and largest relative subordination residual.
//
// # Safety
// Pointers must be valid.
enum FsStatus fs_convolution_diagnostics(const struct FsConvolution *r,
                                         double *mass_defect,
                                         double *max_residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREESUB_H */
