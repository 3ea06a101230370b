#ifndef ENTROPIC_BERGSTROM_H
#define ENTROPIC_BERGSTROM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum EbStatus {
  EB_STATUS_OK = 0,
  EB_STATUS_NULL_POINTER = 1,
  EB_STATUS_INVALID_ARGUMENT = 2,
  EB_STATUS_NOT_POSITIVE_DEFINITE = 3,
  EB_STATUS_DIMENSION_MISMATCH = 4,
  EB_STATUS_INDEX_OUT_OF_RANGE = 5,
  EB_STATUS_PRECONDITION = 6,
  EB_STATUS_PARSE = 7,
  EB_STATUS_IO = 8,
  EB_STATUS_PANIC = 9,
} EbStatus;

// How an estimate was obtained.
typedef enum EbMethod {
  EB_METHOD_CLOSED_FORM = 0,
  EB_METHOD_PLUG_IN_MC = 1,
  EB_METHOD_KNN = 2,
} EbMethod;

// Opaque Gaussian mixture.
typedef struct EbMixture EbMixture;

// Opaque symmetric positive-definite matrix.
typedef struct EbSpdMatrix EbSpdMatrix;

// A scalar estimate with its standard error (0 for closed forms).
typedef struct EbScalarEstimate {
  double value;
  double std_error;
  uint64_t n_samples;
  enum EbMethod method;
} EbScalarEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a success.
//
// The pointer stays valid until the next library call on the same thread.
const char *eb_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *eb_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void eb_string_free(char *s);

// Builds an SPD matrix from `n * n` row-major entries.
//
// # Safety
// `data` must point to `n * n` doubles and `out_matrix` to writable storage.
enum EbStatus eb_spd_new(size_t n, const double *data, struct EbSpdMatrix **out_matrix);

// # Safety
// `m` must come from [`eb_spd_new`] and not have been freed already. NULL is ignored.
void eb_spd_free(struct EbSpdMatrix *m);

// Dimension of the matrix, 0 for NULL.
//
// # Safety
// `m` must be NULL or a live handle.
size_t eb_spd_dim(const struct EbSpdMatrix *m);

// Natural log of the determinant.
//
// # Safety
// `m` must be a live handle and `out_value` writable.
enum EbStatus eb_spd_log_det(const struct EbSpdMatrix *m, double *out_value);

// Schur complement of the leading block: `det(M) / det(M minus last row and column)`.
//
// # Safety
// `m` must be a live handle and `out_value` writable.
enum EbStatus eb_spd_schur_complement_last(const struct EbSpdMatrix *m, double *out_value);

// Bergström gap for the minor obtained by deleting row and column `i`.
//
// # Safety
// `a`, `b` must be live handles and `out_gap` writable.
enum EbStatus eb_bergstrom_gap(const struct EbSpdMatrix *a,
                               const struct EbSpdMatrix *b,
                               size_t i,
                               double *out_gap);

// Ky Fan gap for the leading `n - k` block, `1 <= k < n`.
//
// # Safety
// `a`, `b` must be live handles and `out_gap` writable.
enum EbStatus eb_kyfan_gap(const struct EbSpdMatrix *a,
                           const struct EbSpdMatrix *b,
                           size_t k,
                           double *out_gap);

// Gap of the λ-weighted linear Bonnesen form.
//
// # Safety
// `a`, `b` must be live handles and `out_gap` writable.
enum EbStatus eb_bonnesen_linear_gap(const struct EbSpdMatrix *a,
                                     const struct EbSpdMatrix *b,
                                     double lambda,
                                     size_t i,
                                     double *out_gap);

// Parses a mixture from JSON: `{"weights": [...], "components": [{"mean": [...], "cov": [[...]]}]}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out_mixture` writable.
enum EbStatus eb_mixture_from_json(const char *json,
                                   struct EbMixture **out_mixture);

// Serialises a mixture to JSON. Free the result with [`eb_string_free`].
//
// # Safety
// `m` must be a live handle and `out_json` writable.
enum EbStatus eb_mixture_to_json(const struct EbMixture *m, char **out_json);

// # Safety
// `m` must come from [`eb_mixture_from_json`] and not have been freed already. NULL is ignored.
void eb_mixture_free(struct EbMixture *m);

// Dimension of the mixture, 0 for NULL.
//
// # Safety
// `m` must be NULL or a live handle.
size_t eb_mixture_dim(const struct EbMixture *m);

// Log-density at `x` (length `len`, must equal the dimension).
//
// # Safety
// `x` must point to `len` doubles and `out_value` be writable.
enum EbStatus eb_mixture_log_density(const struct EbMixture *m,
                                     const double *x,
                                     size_t len,
                                     double *out_value);

// Score (gradient of the log-density) at `x`, written to `out_score` of length `len`.
//
// # Safety
// `x` and `out_score` must each point to `len` doubles.
enum EbStatus eb_mixture_score(const struct EbMixture *m,
                               const double *x,
                               size_t len,
                               double *out_score);

// Draws `count` samples, written row-major to `out_samples` (capacity `capacity`
// doubles, at least `count * dim`). The same seed always gives the same draws.
//
// # Safety
// `out_samples` must point to `capacity` writable doubles.
enum EbStatus eb_mixture_sample(const struct EbMixture *m,
                                uint64_t seed,
                                size_t count,
                                double *out_samples,
                                size_t capacity);

// Plug-in Monte-Carlo estimate of the differential entropy (nats).
//
// # Safety
// `m` must be a live handle and `out_estimate` writable.
enum EbStatus eb_mc_entropy(const struct EbMixture *m,
                            size_t samples,
                            uint64_t seed,
                            struct EbScalarEstimate *out_estimate);

// Plug-in Monte-Carlo estimate of the Fisher information (trace form).
//
// # Safety
// `m` must be a live handle and `out_estimate` writable.
enum EbStatus eb_mc_fisher(const struct EbMixture *m,
                           size_t samples,
                           uint64_t seed,
                           struct EbScalarEstimate *out_estimate);

// Runs one registered check on generated instances and returns the JSON report.
// `dim = 0` uses the check's default dimensions.
//
// # Safety
// `name` must be a NUL-terminated string and `out_json` writable.
enum EbStatus eb_run_check_json(const char *name,
                                size_t dim,
                                size_t instances,
                                size_t samples,
                                uint64_t seed,
                                char **out_json);

// Runs a suite from a JSON configuration (NULL for the default suite) and
// returns the JSON report.
//
// # Safety
// `config_json` must be NULL or a NUL-terminated string, `out_json` writable.
enum EbStatus eb_run_suite_json(const char *config_json, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENTROPIC_BERGSTROM_H */
