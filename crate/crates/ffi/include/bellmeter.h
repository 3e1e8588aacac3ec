#ifndef BELLMETER_H
#define BELLMETER_H

/* Generated by cbindgen from the bellmeter-ffi crate. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum BmStatus {
  BM_STATUS_OK = 0,
  BM_STATUS_NULL_POINTER = 1,
  BM_STATUS_INVALID_UTF8 = 2,
  BM_STATUS_JSON = 3,
  BM_STATUS_STRUCTURAL = 4,
  BM_STATUS_INVALID_BEHAVIOUR = 5,
  BM_STATUS_SIGNALLING = 6,
  BM_STATUS_WRONG_SETTING_COUNT = 7,
  BM_STATUS_INDEX_OUT_OF_RANGE = 8,
  BM_STATUS_DOMAIN = 9,
  BM_STATUS_VERTEX_CAP = 10,
  BM_STATUS_MODEL = 11,
  BM_STATUS_CONFIG = 12,
  BM_STATUS_SOLVER = 13,
  BM_STATUS_IO = 14,
  BM_STATUS_PANIC = 15,
} BmStatus;

// Opaque behaviour handle, optionally carrying a settings distribution.
typedef struct BmBehaviour BmBehaviour;

// Opaque hidden-variable model handle.
typedef struct BmHvModel BmHvModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static nul-terminated string.
const char *bm_version(void);

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into the library on this thread.
const char *bm_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string obtained from this library, not yet freed.
void bm_string_free(char *s);

// Parses a behaviour JSON document. Entries within `tol` of `[0, 1]` are clamped.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum BmStatus bm_behaviour_from_json(const char *json, double tol, struct BmBehaviour **out);

// Serializes a behaviour; free the result with [`bm_string_free`].
//
// # Safety
// `b` must be a live handle; `out` must be writable.
enum BmStatus bm_behaviour_to_json(const struct BmBehaviour *b, char **out);

// Releases a behaviour handle. Null is ignored.
//
// # Safety
// `b` must be null or a handle from this library, not yet freed.
void bm_behaviour_free(struct BmBehaviour *b);

// # Safety
// `b` must be a live handle; outputs must be writable.
enum BmStatus bm_behaviour_num_settings(const struct BmBehaviour *b, size_t *out_a, size_t *out_b);

// `P(a,b|x,y)` with outcome index 0 meaning `+1`.
//
// # Safety
// `b` must be a live handle; `out` must be writable.
enum BmStatus bm_behaviour_probability(const struct BmBehaviour *b,
                                       size_t x,
                                       size_t y,
                                       size_t a,
                                       size_t outcome_b,
                                       double *out);

// Writes whether the behaviour is valid and non-signalling within `tol`.
//
// # Safety
// `b` must be a live handle; `out` must be writable.
enum BmStatus bm_behaviour_is_non_signalling(const struct BmBehaviour *b, double tol, bool *out);

// Writes the four CHSH values into `out[0..4]`.
//
// # Safety
// `b` must be a live handle; `out` must have room for four doubles.
enum BmStatus bm_chsh_values(const struct BmBehaviour *b, double *out);

// Closed-form measure from the largest CHSH value (two settings only).
//
// # Safety
// `b` must be a live handle; `out` must be writable.
enum BmStatus bm_measure_formula(const struct BmBehaviour *b, double tol, double *out);

// Local content from the linear program over deterministic strategies.
//
// # Safety
// `b` must be a live handle; `out` must be writable.
enum BmStatus bm_measure_lp(const struct BmBehaviour *b, double tol, double *out);

// Splits a two-setting behaviour as `p·local + (1 − p)·PR-box`.
// `out_pr_index` receives 1..=8, or 0 when the behaviour is local.
// `out_local` may be null when the local part is not wanted.
//
// # Safety
// `b` must be a live handle; non-null outputs must be writable.
enum BmStatus bm_split_local_pr(const struct BmBehaviour *b,
                                double tol,
                                double *out_p,
                                uint32_t *out_pr_index,
                                struct BmBehaviour **out_local);

// Born-rule behaviour of `cos(θ/2)|00⟩ + sin(θ/2)|11⟩` measured at the
// given x–z plane basis angles.
//
// # Safety
// `alice` and `bob` must point to `num_alice` and `num_bob` doubles;
// `out` must be writable.
enum BmStatus bm_quantum_behaviour(double theta,
                                   const double *alice,
                                   size_t num_alice,
                                   const double *bob,
                                   size_t num_bob,
                                   struct BmBehaviour **out);

// Chained-settings behaviour of the maximally entangled state, `m ≥ 2`.
//
// # Safety
// `out` must be writable.
enum BmStatus bm_chained_behaviour(size_t m, struct BmBehaviour **out);

// Chained expression value, the free-choice bound it implies, and the
// `π²/(4(2m − 1))` envelope.
//
// # Safety
// Outputs must be writable.
enum BmStatus bm_chained_bound(size_t m,
                               double tol,
                               double *out_value,
                               double *out_bound,
                               double *out_envelope);

// Fully local, fully non-free model of `b`. `settings` holds the `[x][y]`
// settings distribution; when null, the behaviour's own distribution is used,
// or the uniform one if it has none.
//
// # Safety
// `b` must be a live handle; `settings` must be null or point to
// `num_settings_a · num_settings_b` doubles; `out` must be writable.
enum BmStatus bm_dilate(const struct BmBehaviour *b,
                        const double *settings,
                        double tol,
                        struct BmHvModel **out);

// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum BmStatus bm_model_from_json(const char *json, double tol, struct BmHvModel **out);

// # Safety
// `m` must be a live handle; `out` must be writable.
enum BmStatus bm_model_to_json(const struct BmHvModel *m, char **out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `m` must be null or a handle from this library, not yet freed.
void bm_model_free(struct BmHvModel *m);

// Total prior mass of local and of free hidden values.
//
// # Safety
// `m` must be a live handle; outputs must be writable.
enum BmStatus bm_model_measures(const struct BmHvModel *m,
                                double tol,
                                double *out_locality,
                                double *out_freedom);

// Behaviour reproduced by the model.
//
// # Safety
// `m` must be a live handle; `out` must be writable.
enum BmStatus bm_model_behaviour(const struct BmHvModel *m, struct BmBehaviour **out);

// Monte Carlo run with settings drawn from the model; writes the result as
// JSON. Free the string with [`bm_string_free`].
//
// # Safety
// `m` must be a live handle; `out_json` must be writable.
enum BmStatus bm_simulate(const struct BmHvModel *m,
                          uint64_t trials,
                          uint64_t seed,
                          double tol,
                          char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLMETER_H */
