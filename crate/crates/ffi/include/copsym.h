#ifndef COPSYM_H
#define COPSYM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CopsymStatus {
  COPSYM_STATUS_OK = 0,
  COPSYM_STATUS_NULL_POINTER = 1,
  COPSYM_STATUS_DOMAIN = 2,
  COPSYM_STATUS_INPUT = 3,
  COPSYM_STATUS_FORMAT = 4,
  COPSYM_STATUS_EMPTY_SAMPLE = 5,
  COPSYM_STATUS_CONFIG = 6,
  COPSYM_STATUS_NETWORK = 7,
  COPSYM_STATUS_IO = 8,
  COPSYM_STATUS_INVALID_UTF8 = 9,
  COPSYM_STATUS_PANIC = 10,
} CopsymStatus;

typedef enum CopsymStatistic {
  COPSYM_STATISTIC_R = 0,
  COPSYM_STATISTIC_S = 1,
  COPSYM_STATISTIC_T = 2,
} CopsymStatistic;

/**
 * A parametric copula.
 */
typedef struct CopsymCopula CopsymCopula;

/**
 * A bivariate sample.
 */
typedef struct CopsymSample CopsymSample;

/**
 * The outcome of a symmetry test.
 */
typedef struct CopsymTestResult CopsymTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *copsym_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into the library from the same thread.
 */
const char *copsym_last_error(void);

/**
 * Builds a sample from `n` pairs `(x[i], y[i])`.
 *
 * # Safety
 * `x` and `y` must point to `n` readable doubles; `out` must be writable.
 */
enum CopsymStatus copsym_sample_new(const double *x,
                                    const double *y,
                                    size_t n,
                                    struct CopsymSample **out);

/**
 * # Safety
 * `s` must be NULL or a live handle from this library.
 */
size_t copsym_sample_len(const struct CopsymSample *s);

/**
 * Copies pairs into `x` and `y`, each holding at least `len` doubles.
 *
 * # Safety
 * `s` must be a live handle; `x` and `y` must point to `len` writable doubles.
 */
enum CopsymStatus copsym_sample_copy(const struct CopsymSample *s,
                                     double *x,
                                     double *y,
                                     size_t len);

/**
 * # Safety
 * `s` must be NULL or a handle not yet freed.
 */
void copsym_sample_free(struct CopsymSample *s);

/**
 * Parses a copula token such as `gumbel:tau=0.5:delta=0.25`.
 *
 * # Safety
 * `token` must be a NUL-terminated string; `out` must be writable.
 */
enum CopsymStatus copsym_copula_parse(const char *token, struct CopsymCopula **out);

/**
 * # Safety
 * `c` must be NULL or a handle not yet freed.
 */
void copsym_copula_free(struct CopsymCopula *c);

/**
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CopsymStatus copsym_copula_cdf(const struct CopsymCopula *c, double u, double v, double *out);

/**
 * Draws `n` pairs from the copula; the same seed gives the same sample.
 *
 * # Safety
 * `c` must be a live handle; `out` must be writable.
 */
enum CopsymStatus copsym_copula_sample(const struct CopsymCopula *c,
                                       size_t n,
                                       uint64_t seed,
                                       struct CopsymSample **out);

/**
 * Empirical Bernstein copula of order `m` at `(u, v)`.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum CopsymStatus copsym_bernstein_copula(const struct CopsymSample *s,
                                          size_t m,
                                          double u,
                                          double v,
                                          double *out);

/**
 * Runs the symmetry test. `m = 0` picks the default order; `empirical`
 * non-zero uses the empirical copula and ignores `m`.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum CopsymStatus copsym_test_run(const struct CopsymSample *s,
                                  size_t m,
                                  size_t grid,
                                  size_t replicates,
                                  uint64_t seed,
                                  bool empirical,
                                  bool plus_one,
                                  struct CopsymTestResult **out);

/**
 * Statistic value, its sqrt(n)-scaled form and p-value.
 *
 * # Safety
 * `r` must be a live handle; each output pointer must be NULL or writable.
 */
enum CopsymStatus copsym_test_result_statistic(const struct CopsymTestResult *r,
                                               enum CopsymStatistic which,
                                               double *value,
                                               double *scaled,
                                               double *p_value);

/**
 * # Safety
 * `r` must be NULL or a live handle.
 */
size_t copsym_test_result_n(const struct CopsymTestResult *r);

/**
 * Bernstein order used, or 0 for the empirical-copula test.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
size_t copsym_test_result_m(const struct CopsymTestResult *r);

/**
 * Number of warnings attached to the result.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
size_t copsym_test_result_warning_count(const struct CopsymTestResult *r);

/**
 * Warning `i` as a newly allocated string; release it with `copsym_string_free`.
 *
 * # Safety
 * `r` must be a live handle.
 */
char *copsym_test_result_warning(const struct CopsymTestResult *r, size_t i);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void copsym_string_free(char *s);

/**
 * # Safety
 * `r` must be NULL or a handle not yet freed.
 */
void copsym_test_result_free(struct CopsymTestResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COPSYM_H */
