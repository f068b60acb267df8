#ifndef ONESTEP_GLM_H
#define ONESTEP_GLM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OglmStatus {
  OGLM_STATUS_OK = 0,
  OGLM_STATUS_NULL_POINTER = 1,
  OGLM_STATUS_INVALID_ARGUMENT = 2,
  OGLM_STATUS_SHAPE = 3,
  OGLM_STATUS_DOMAIN = 4,
  OGLM_STATUS_SINGULAR = 5,
  OGLM_STATUS_PILOT_TOO_SMALL = 6,
  OGLM_STATUS_ONE_SHOT_UNAVAILABLE = 7,
  OGLM_STATUS_WORKER = 8,
  OGLM_STATUS_EXPERIMENT = 9,
  OGLM_STATUS_PANIC = 10,
} OglmStatus;

typedef enum OglmFamily {
  OGLM_FAMILY_LOGISTIC = 0,
  OGLM_FAMILY_POISSON = 1,
} OglmFamily;

typedef enum OglmSharding {
  OGLM_SHARDING_RANDOM = 0,
  // Blocks of rows ordered by their covariate sums.
  OGLM_SHARDING_COVARIATE_SUM = 1,
  OGLM_SHARDING_CONTIGUOUS = 2,
} OglmSharding;

// Rows of a dataset. Opaque.
typedef struct OglmData OglmData;

// A master with in-process workers over a sharded dataset. Opaque.
typedef struct OglmSession OglmSession;

// Diagnostics of an iterative fit.
typedef struct OglmFitInfo {
  // Kernel log-likelihood at the estimate; NaN when not computed.
  double log_lik;
  uint32_t iterations;
  bool converged;
  double final_step_norm;
} OglmFitInfo;

// Communication used by a distributed call.
typedef struct OglmRoundStats {
  size_t rounds;
  // Rounds that broadcast coefficients or pull rows.
  size_t heavy_rounds;
  uint64_t bytes;
} OglmRoundStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next call into this library from the same thread.
const char *oglm_last_error_message(void);

// Upper-tail probability of the chi-square distribution.
//
// # Safety
// `out` must be valid for one `double` write.
enum OglmStatus oglm_chi2_sf(double x, uint32_t df, double *out);

// Copies `n` responses and an `n × d` row-major design into a new handle.
//
// # Safety
// `y` must point to `n` doubles, `x` to `n * d` doubles, and `out` must be
// valid for one pointer write. Free the handle with [`oglm_data_free`].
enum OglmStatus oglm_data_new(const double *y,
                              const double *x,
                              size_t n,
                              size_t d,
                              struct OglmData **out);

// # Safety
// `data` must be NULL or a handle from [`oglm_data_new`] not yet freed.
void oglm_data_free(struct OglmData *data);

// Maximum-likelihood fit by Fisher scoring. `init` may be NULL (zeros).
// `tol <= 0` and `max_iter == 0` select the defaults.
//
// # Safety
// `data` must be a live handle; `init` (if non-NULL) and `beta_out` must
// point to `beta_len` doubles; `info_out` may be NULL.
enum OglmStatus oglm_fit(const struct OglmData *data,
                         enum OglmFamily fam,
                         const double *init,
                         double tol,
                         uint32_t max_iter,
                         double *beta_out,
                         size_t beta_len,
                         struct OglmFitInfo *info_out);

// Score, row-major information and kernel log-likelihood at `beta`.
//
// # Safety
// `beta` and `score_out` must hold `d` doubles, `info_out` `d * d`, and
// `log_lik_out` one.
enum OglmStatus oglm_derivatives(const struct OglmData *data,
                                 enum OglmFamily fam,
                                 const double *beta,
                                 size_t d,
                                 double *score_out,
                                 double *info_out,
                                 double *log_lik_out);

// Shards `data` across `workers` in-process workers.
//
// # Safety
// `data` must be a live handle and `out` valid for one pointer write. Free
// the session with [`oglm_session_free`]; `data` may be freed right away.
enum OglmStatus oglm_session_new(const struct OglmData *data,
                                 enum OglmFamily fam,
                                 size_t workers,
                                 enum OglmSharding sharding,
                                 uint64_t seed,
                                 struct OglmSession **out);

// # Safety
// `session` must be NULL or a handle from [`oglm_session_new`] not yet freed.
void oglm_session_free(struct OglmSession *session);

// Pilot sample of `pilot_n` rows, then one Newton step over all shards.
//
// # Safety
// `session` must be live; `beta_out` must hold `beta_len` doubles; `stats`
// may be NULL.
enum OglmStatus oglm_session_one_step(struct OglmSession *session,
                                      size_t pilot_n,
                                      uint64_t seed,
                                      double *beta_out,
                                      size_t beta_len,
                                      struct OglmRoundStats *stats);

// Distributed Fisher scoring from zero; one aggregation round per
// evaluation.
//
// # Safety
// As for [`oglm_session_one_step`]; `info_out` may be NULL.
enum OglmStatus oglm_session_global(struct OglmSession *session,
                                    double tol,
                                    uint32_t max_iter,
                                    double *beta_out,
                                    size_t beta_len,
                                    struct OglmFitInfo *info_out,
                                    struct OglmRoundStats *stats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONESTEP_GLM_H */
