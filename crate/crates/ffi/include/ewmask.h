#ifndef EWMASK_H
#define EWMASK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EwmaskStatus {
  EWMASK_STATUS_OK = 0,
  EWMASK_STATUS_NULL_POINTER = 1,
  EWMASK_STATUS_INVALID_ARGUMENT = 2,
  EWMASK_STATUS_INPUT_ERROR = 3,
  EWMASK_STATUS_ESTIMATION_FAILED = 4,
  EWMASK_STATUS_PANIC = 5,
} EwmaskStatus;

typedef enum EwmaskZone {
  EWMASK_ZONE_GREEN = 0,
  EWMASK_ZONE_YELLOW = 1,
  EWMASK_ZONE_RED = 2,
} EwmaskZone;

/**
 * EWMA-SK estimate together with its in-sample moment path.
 */
typedef struct EwmaskEwmaSkFit EwmaskEwmaSkFit;

/**
 * Return series with its in-sample/out-of-sample split.
 */
typedef struct EwmaskReturns EwmaskReturns;

typedef struct EwmaskMoments {
  double mu;
  double sigma;
  double skew;
  double kurt;
} EwmaskMoments;

typedef struct EwmaskLrTest {
  double statistic;
  double p_value;
} EwmaskLrTest;

typedef struct EwmaskBaselZone {
  enum EwmaskZone zone;
  uint64_t violations;
  double multiplier;
} EwmaskBaselZone;

/**
 * Backtest of one VaR series. `first_failure` is 0 when there was no hit,
 * in which case `tuff` is all zeros.
 */
typedef struct EwmaskBacktestSummary {
  uint64_t observations;
  uint64_t violations;
  double failure_pct;
  uint64_t first_failure;
  struct EwmaskLrTest tuff;
  struct EwmaskLrTest uc;
  struct EwmaskLrTest ind;
  struct EwmaskLrTest cc;
  struct EwmaskBaselZone basel;
} EwmaskBacktestSummary;

typedef struct EwmaskGarchParams {
  double mu;
  double omega;
  double alpha;
  double beta;
  double log_likelihood;
} EwmaskGarchParams;

/**
 * `t_stats` entries are NaN when the Hessian could not be inverted.
 */
typedef struct EwmaskDecayParams {
  double lambda1;
  double lambda2;
  double lambda3;
  double mu;
  double log_likelihood;
  double t_stats[3];
} EwmaskDecayParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ewmask_last_error_message(void);

void ewmask_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ewmask_version(void);

/**
 * Cornish-Fisher standardized loss quantile at tail probability `alpha`.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum EwmaskStatus ewmask_cornish_fisher_quantile(double alpha,
                                                 double skew,
                                                 double kurt,
                                                 bool raw_kurtosis,
                                                 bool full,
                                                 double *out);

/**
 * Squared Gram-Charlier density at `x`.
 *
 * # Safety
 * `out` must be valid for a write of one `double`.
 */
enum EwmaskStatus ewmask_gc_density(double x, double skew, double kurt, double *out);

/**
 * Moments of the sum of `x` i.i.d. daily increments.
 *
 * # Safety
 * `out` must be valid for a write of one `EwmaskMoments`.
 */
enum EwmaskStatus ewmask_rescale_moments(double mu,
                                         double sigma,
                                         double skew,
                                         double kurt,
                                         uint32_t x,
                                         struct EwmaskMoments *out);

/**
 * Kupiec unconditional coverage test.
 *
 * # Safety
 * `out` must be valid for a write of one `EwmaskLrTest`.
 */
enum EwmaskStatus ewmask_lr_uc(uint64_t n0, uint64_t n1, double p, struct EwmaskLrTest *out);

/**
 * Christoffersen independence test from transition counts.
 *
 * # Safety
 * `out` must be valid for a write of one `EwmaskLrTest`.
 */
enum EwmaskStatus ewmask_lr_ind(uint64_t n00,
                                uint64_t n01,
                                uint64_t n10,
                                uint64_t n11,
                                struct EwmaskLrTest *out);

/**
 * Conditional coverage: `uc + ind` referred to chi-square(2).
 *
 * # Safety
 * `out` must be valid for a write of one `EwmaskLrTest`.
 */
enum EwmaskStatus ewmask_lr_cc(double uc, double ind, struct EwmaskLrTest *out);

/**
 * Time-until-first-failure test for a first hit at 1-based `index`.
 *
 * # Safety
 * `out` must be valid for a write of one `EwmaskLrTest`.
 */
enum EwmaskStatus ewmask_lr_tuff(uint64_t index, double alpha, struct EwmaskLrTest *out);

/**
 * Basel traffic-light zone and capital multiplier for a violation count.
 *
 * # Safety
 * `out` must be valid for a write of one `EwmaskBaselZone`.
 */
enum EwmaskStatus ewmask_basel_zone(int64_t violations, struct EwmaskBaselZone *out);

/**
 * Full backtest of `len` aligned (return, VaR loss) pairs at level `alpha`.
 *
 * # Safety
 * `returns` and `var_losses` must each point to `len` readable doubles;
 * `out` must be valid for a write of one `EwmaskBacktestSummary`.
 */
enum EwmaskStatus ewmask_backtest(const double *returns,
                                  const double *var_losses,
                                  size_t len,
                                  double alpha,
                                  struct EwmaskBacktestSummary *out);

/**
 * Wraps `len` percent returns, holding out the last `out_of_sample`.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be valid for a
 * write of one pointer. Release the handle with [`ewmask_returns_free`].
 */
enum EwmaskStatus ewmask_returns_from_values(const double *values,
                                             size_t len,
                                             size_t out_of_sample,
                                             struct EwmaskReturns **out);

/**
 * Reads a `date,price` CSV, converts to percent log returns and holds out
 * the last `out_of_sample`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for a write
 * of one pointer. Release the handle with [`ewmask_returns_free`].
 */
enum EwmaskStatus ewmask_returns_from_csv(const char *path,
                                          size_t out_of_sample,
                                          struct EwmaskReturns **out);

/**
 * Number of returns (in-sample plus out-of-sample) in the handle; 0 for NULL.
 *
 * # Safety
 * `returns` must be NULL or a live handle.
 */
size_t ewmask_returns_len(const struct EwmaskReturns *returns);

/**
 * Number of in-sample returns; 0 for NULL.
 *
 * # Safety
 * `returns` must be NULL or a live handle.
 */
size_t ewmask_returns_in_sample_len(const struct EwmaskReturns *returns);

/**
 * # Safety
 * `returns` must be NULL or a handle not yet freed.
 */
void ewmask_returns_free(struct EwmaskReturns *returns);

/**
 * GARCH(1,1)-Normal maximum-likelihood fit on the in-sample part.
 *
 * # Safety
 * `returns` must be a live handle; `out` must be valid for a write of one
 * `EwmaskGarchParams`.
 */
enum EwmaskStatus ewmask_garch_fit(const struct EwmaskReturns *returns,
                                   struct EwmaskGarchParams *out);

/**
 * EWMA-SK maximum-likelihood fit on the in-sample part. With `pin_mu` the
 * mean is fixed at the in-sample average.
 *
 * # Safety
 * `returns` must be a live handle; `out` must be valid for a write of one
 * pointer. Release the result with [`ewmask_ewma_sk_free`].
 */
enum EwmaskStatus ewmask_ewma_sk_fit(const struct EwmaskReturns *returns,
                                     bool pin_mu,
                                     struct EwmaskEwmaSkFit **out);

/**
 * # Safety
 * `fit` must be a live handle; `out` must be valid for a write of one
 * `EwmaskDecayParams`.
 */
enum EwmaskStatus ewmask_ewma_sk_params(const struct EwmaskEwmaSkFit *fit,
                                        struct EwmaskDecayParams *out);

/**
 * Length of the in-sample moment path; 0 for NULL.
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
size_t ewmask_ewma_sk_path_len(const struct EwmaskEwmaSkFit *fit);

/**
 * Copies the moment path into caller buffers of `capacity` doubles each.
 * Any of the three buffers may be NULL to skip it.
 *
 * # Safety
 * `fit` must be a live handle; each non-NULL buffer must be writable for
 * `capacity` doubles.
 */
enum EwmaskStatus ewmask_ewma_sk_path_copy(const struct EwmaskEwmaSkFit *fit,
                                           double *variance,
                                           double *third,
                                           double *fourth,
                                           size_t capacity);

/**
 * # Safety
 * `fit` must be NULL or a handle not yet freed.
 */
void ewmask_ewma_sk_free(struct EwmaskEwmaSkFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EWMASK_H */
