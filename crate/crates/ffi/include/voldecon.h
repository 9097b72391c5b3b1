#ifndef VOLDECON_H
#define VOLDECON_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes.
 */
typedef enum VdStatus {
  VD_STATUS_OK = 0,
  VD_STATUS_NULL_POINTER = 1,
  VD_STATUS_INVALID_PARAMETER = 2,
  VD_STATUS_NUMERIC = 3,
  VD_STATUS_TOO_SMALL = 4,
  VD_STATUS_EMPTY_SERIES = 5,
  VD_STATUS_ALL_MASKED = 6,
  VD_STATUS_GRID_MISMATCH = 7,
  VD_STATUS_PANIC = 8,
  VD_STATUS_OTHER = 9,
} VdStatus;

/*
 Deconvolution kernel `v_h`, tabulated once and reusable across data sets.
 */
typedef struct VdKernel VdKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. Valid until the next
 call into this library from the same thread.
 */
const char *vd_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *vd_version(void);

/*
 Density of `log Z²` at `x`.
 */
double vd_noise_density(double x);

/*
 Characteristic function `E e^{it log Z²}`.

 # Safety
 `re` and `im` must be valid for writes.
 */
enum VdStatus vd_noise_charfn(double t, double *re, double *im);

/*
 Tabulates `v_h` on `[-x_max, x_max]`. `noise_flag = 0` drops the noise
 (plain kernel), anything else uses `log χ²(1)` noise.

 # Safety
 `out` must be valid for writes.
 */
enum VdStatus vd_kernel_new(double h, double x_max, int32_t noise_flag, struct VdKernel **out);

/*
 Releases a kernel; null is ignored.

 # Safety
 `kernel` must come from [`vd_kernel_new`] and not be used afterwards.
 */
void vd_kernel_free(struct VdKernel *kernel);

/*
 `v_h(x)`, zero beyond the tabulated range.

 # Safety
 `kernel` must be a live handle and `out` valid for writes.
 */
enum VdStatus vd_kernel_eval(const struct VdKernel *kernel, double x, double *out);

/*
 Kernel density estimate `f_nh` of `y` at the `m` grid points (raw,
 possibly negative).

 # Safety
 `y` holds `n` values, `grid` and `out` hold `m`; `kernel` is live.
 */
enum VdStatus vd_kernel_density(const struct VdKernel *kernel,
                                const double *y,
                                size_t n,
                                const double *grid,
                                size_t m,
                                double *out);

/*
 Meyer-wavelet estimate. `level < 0` selects the level automatically and
 `truncation = 0` means `L = n`; the level used is written to `level_out`
 when it is not null.

 # Safety
 `y` holds `n` values, `grid` and `out` hold `m`.
 */
enum VdStatus vd_wavelet_density(const double *y,
                                 size_t n,
                                 int32_t level,
                                 size_t truncation,
                                 const double *grid,
                                 size_t m,
                                 double *out,
                                 int32_t *level_out);

/*
 Penalized projection estimate with adaptive level. `kn = 0` means
 `K_n = n`; the selected level is written to `level_out` when not null.

 # Safety
 `y` holds `n` values, `grid` and `out` hold `m`.
 */
enum VdStatus vd_ppe_density(const double *y,
                             size_t n,
                             double kappa,
                             size_t kn,
                             const double *grid,
                             size_t m,
                             double *out,
                             size_t *level_out);

/*
 Deconvolution regression of `Y_{j+1}` on `Y_j`. Masked points get
 `mhat = NaN` and `masked = 1`. `center != 0` removes `E log Z²` from the
 responses.

 # Safety
 `y` holds `n` values; `grid`, `mhat`, `fhat` and `masked` hold `m`.
 */
enum VdStatus vd_regression(const double *y,
                            size_t n,
                            double h,
                            double denominator_floor,
                            int32_t center,
                            const double *grid,
                            size_t m,
                            double *mhat,
                            double *fhat,
                            uint8_t *masked);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOLDECON_H */
