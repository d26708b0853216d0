/* equicut C API. See include/equicut.h usage notes in the repository README. */

#ifndef EQUICUT_H
#define EQUICUT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
enum EqStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  EQ_STATUS_OK = 0,
  EQ_STATUS_NULL_POINTER = -1,
  EQ_STATUS_INVALID_ARGUMENT = -2,
  EQ_STATUS_PARSE_ERROR = -3,
  EQ_STATUS_SOLVE_ERROR = -4,
  EQ_STATUS_UTF8_ERROR = -5,
  EQ_STATUS_BUFFER_TOO_SMALL = -6,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum EqStatus EqStatus;
#else
typedef int32_t EqStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Opaque knapsack game instance handle.
typedef struct EqInstance EqInstance;

// Opaque solve report handle.
typedef struct EqReport EqReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the library as a static NUL-terminated string.
const char *eq_version(void);

// Copies the message of the most recent error on this thread into `buf`
// (NUL-terminated, truncated to `cap` bytes) and returns the full message
// length in bytes, excluding the terminator. Passing a null or empty
// buffer just queries the length.
//
// # Safety
// When `buf` is non-null it must point to at least `cap` writable bytes.
size_t eq_last_error_message(char *buf, size_t cap);

// Generates a random instance; on success stores a new handle in `out`.
// The caller frees it with [`eq_instance_free`].
//
// # Safety
// `out` must be a valid pointer to writable handle storage.
EqStatus eq_instance_generate(size_t players,
                              size_t markets,
                              uint64_t seed,
                              int64_t gamma,
                              struct EqInstance **out);

// Parses and validates an instance from its JSON representation.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a valid pointer
// to writable handle storage.
EqStatus eq_instance_from_json(const char *json, struct EqInstance **out);

// Serializes the instance to JSON. The returned string is owned by the
// caller and must be released with [`eq_string_free`]; null on error.
//
// # Safety
// `inst` must be a live handle from this library (or null).
char *eq_instance_to_json(const struct EqInstance *inst);

// # Safety
// `inst` must be a live handle from this library, or null (a no-op).
void eq_instance_free(struct EqInstance *inst);

// Number of players, or 0 when `inst` is null.
//
// # Safety
// `inst` must be a live handle from this library (or null).
size_t eq_instance_players(const struct EqInstance *inst);

// Number of markets, or 0 when `inst` is null.
//
// # Safety
// `inst` must be a live handle from this library (or null).
size_t eq_instance_markets(const struct EqInstance *inst);

// Releases a string returned by [`eq_instance_to_json`].
//
// # Safety
// `s` must be a string returned by this library and not yet freed, or null.
void eq_string_free(char *s);

// Runs the cutting-plane solver on the instance, seeding the cut set with
// the joint-problem optimizer. On success stores a report handle in `out`;
// the caller frees it with [`eq_report_free`].
//
// # Safety
// `inst` must be a live handle and `out` a valid pointer to writable
// handle storage.
EqStatus eq_solve(const struct EqInstance *inst,
                  double epsilon,
                  size_t max_iterations,
                  uint64_t node_limit,
                  struct EqReport **out);

// Termination status as an [`EqTermination`] value, or -1 when null.
//
// # Safety
// `report` must be a live handle from this library (or null).
int32_t eq_report_status(const struct EqReport *report);

// # Safety
// `report` must be a live handle from this library (or null).
size_t eq_report_iterations(const struct EqReport *report);

// # Safety
// `report` must be a live handle from this library (or null).
double eq_report_delta_lower(const struct EqReport *report);

// # Safety
// `report` must be a live handle from this library (or null).
double eq_report_delta_upper(const struct EqReport *report);

// Length of the final joint decision vector.
//
// # Safety
// `report` must be a live handle from this library (or null).
size_t eq_report_point_len(const struct EqReport *report);

// Copies the final joint decision into `buf`.
//
// # Safety
// `report` must be a live handle and `buf` must point to at least `cap`
// writable doubles.
EqStatus eq_report_point(const struct EqReport *report, double *buf, size_t cap);

// # Safety
// `report` must be a live handle from this library, or null (a no-op).
void eq_report_free(struct EqReport *report);

// Checks whether `point` is a generalized Nash equilibrium of the
// instance: no player can improve by more than `tol` unilaterally.
// Writes 1 or 0 into `out_is_equilibrium`.
//
// # Safety
// `inst` must be a live handle, `point` must reference `len` readable
// doubles, and `out_is_equilibrium` must be writable.
EqStatus eq_verify_gne(const struct EqInstance *inst,
                       const double *point,
                       size_t len,
                       double tol,
                       uint64_t node_limit,
                       int32_t *out_is_equilibrium);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUICUT_H */
