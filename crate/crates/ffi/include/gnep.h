#ifndef GNEP_H
#define GNEP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every function.
typedef enum GnepStatus {
  GNEP_STATUS_OK = 0,
  GNEP_STATUS_NULL_POINTER = 1,
  GNEP_STATUS_INVALID_UTF8 = 2,
  GNEP_STATUS_SCHEMA = 3,
  GNEP_STATUS_MODEL = 4,
  GNEP_STATUS_USAGE = 5,
  // The solver found no certified point.
  GNEP_STATUS_SOLVER_FAILURE = 6,
  GNEP_STATUS_CERTIFICATE_INVALID = 7,
  // Verification ran and the point is not an equilibrium.
  GNEP_STATUS_NOT_EQUILIBRIUM = 8,
  GNEP_STATUS_BUFFER_TOO_SMALL = 9,
  GNEP_STATUS_PANIC = 10,
} GnepStatus;

// Opaque problem handle.
typedef struct GnepHandle GnepHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. Valid
// until the next failing call on the same thread.
const char *gnep_last_error_message(void);

// Parses a problem file (JSON text).
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` writable.
enum GnepStatus gnep_problem_from_json(const char *json, struct GnepHandle **out);

// Loads a built-in problem by name.
//
// # Safety
// `name` must be a valid NUL-terminated string and `out` writable.
enum GnepStatus gnep_problem_from_fixture(const char *name, struct GnepHandle **out);

// # Safety
// `h` must come from this library and not be used afterwards. Null is a no-op.
void gnep_problem_free(struct GnepHandle *h);

// # Safety
// `h` must be a live handle and `out` writable.
enum GnepStatus gnep_problem_num_players(const struct GnepHandle *h, uintptr_t *out);

// Total number of variables.
//
// # Safety
// `h` must be a live handle and `out` writable.
enum GnepStatus gnep_problem_dim(const struct GnepHandle *h, uintptr_t *out);

// Solves the VI. On `GNEP_STATUS_OK`, `x_out` (length `len` = dim) holds
// the certified point and `residual_out` its residual.
//
// # Safety
// `h` must be a live handle, `x_out` writable for `len` doubles and
// `residual_out` writable or null.
enum GnepStatus gnep_solve(const struct GnepHandle *h,
                           uint64_t seed,
                           double *x_out,
                           uintptr_t len,
                           double *residual_out);

// Like `gnep_solve`, writing the full report as canonical JSON to `*out`
// (free with `gnep_string_free`). Returns `GNEP_STATUS_SOLVER_FAILURE`
// with a report when no point is certified.
//
// # Safety
// `h` must be a live handle and `out` writable.
enum GnepStatus gnep_solve_json(const struct GnepHandle *h, uint64_t seed, char **out);

// # Safety
// `s` must come from this library, or be null.
void gnep_string_free(char *s);

// Maximum per-player regret at `x`; `GNEP_STATUS_NOT_EQUILIBRIUM` when it
// exceeds `eps` (the value is still written).
//
// # Safety
// `h` must be a live handle, `x` readable for `len` doubles and
// `max_regret_out` writable or null.
enum GnepStatus gnep_verify(const struct GnepHandle *h,
                            const double *x,
                            uintptr_t len,
                            double eps,
                            double *max_regret_out);

// `min_y <w, y - x>` over the shared set after checking `w` against `T(x)`.
//
// # Safety
// `h` must be a live handle, `x` and `w` readable for `len` doubles and
// `out` writable.
enum GnepStatus gnep_vi_residual(const struct GnepHandle *h,
                                 const double *x,
                                 const double *w,
                                 uintptr_t len,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNEP_H */
