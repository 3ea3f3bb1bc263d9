#ifndef SLOWECHO_H
#define SLOWECHO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlowechoStatus {
  SLOWECHO_STATUS_OK = 0,
  SLOWECHO_STATUS_IO = 1,
  SLOWECHO_STATUS_CONFIG = 2,
  SLOWECHO_STATUS_INSTABILITY = 3,
  SLOWECHO_STATUS_ANALYSIS = 4,
  SLOWECHO_STATUS_NULL_POINTER = 10,
  SLOWECHO_STATUS_INVALID_UTF8 = 11,
  SLOWECHO_STATUS_WRONG_KIND = 12,
  SLOWECHO_STATUS_OUT_OF_RANGE = 13,
  SLOWECHO_STATUS_PANIC = 99,
} SlowechoStatus;

/*
 Parsed scenario configuration.
 */
typedef struct SlowechoConfig SlowechoConfig;

/*
 Outcome of [`slowecho_run`].
 */
typedef struct SlowechoResult SlowechoResult;

/*
 One sweep point; NaN marks an undetected delay.
 */
typedef struct SlowechoSweepRow {
  double t_h_us;
  double hole_depth;
  double tau_g_us;
  double v_g_km_s;
  double eta;
  double echo_efficiency;
} SlowechoSweepRow;

/*
 Exponential fit A·exp[B(τ − C)] with the log-linear R².
 */
typedef struct SlowechoFit {
  double a;
  double b;
  double c;
  double r_squared;
} SlowechoFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread ("" after a success).
 Valid until the next slowecho call on the same thread.
 */
const char *slowecho_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *slowecho_version(void);

/*
 Parses config text (`dotted.key = value` lines).

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum SlowechoStatus slowecho_config_parse(const char *text, struct SlowechoConfig **out);

/*
 SHA-256 of the canonical config text; owned by `cfg`.

 # Safety
 `cfg` must be null or a live handle from [`slowecho_config_parse`].
 */
const char *slowecho_config_hash(const struct SlowechoConfig *cfg);

/*
 # Safety
 `cfg` must be null or a handle from [`slowecho_config_parse`] not yet freed.
 */
void slowecho_config_free(struct SlowechoConfig *cfg);

/*
 Runs the configured scenario.

 # Safety
 `cfg` must be a live config handle; `out` must be writable.
 */
enum SlowechoStatus slowecho_run(const struct SlowechoConfig *cfg, struct SlowechoResult **out);

/*
 Writes the result's artifacts and manifest into `dir`.

 # Safety
 `cfg` and `result` must be live handles (the result produced from `cfg`);
 `dir` must be a NUL-terminated path.
 */
enum SlowechoStatus slowecho_write_artifacts(const struct SlowechoConfig *cfg,
                                             const struct SlowechoResult *result,
                                             const char *dir);

/*
 JSON summary of the result; owned by `result`.

 # Safety
 `result` must be null or a live result handle.
 */
const char *slowecho_result_summary_json(const struct SlowechoResult *result);

/*
 Primary echo efficiency of the single run, the burnt run of a pair, or the
 forward run of a backward control.

 # Safety
 `result` must be a live result handle; `out` must be writable.
 */
enum SlowechoStatus slowecho_result_echo_efficiency(const struct SlowechoResult *result,
                                                    double *out);

/*
 Number of sweep rows (0 for non-sweep results).

 # Safety
 `result` must be null or a live result handle.
 */
uintptr_t slowecho_result_sweep_len(const struct SlowechoResult *result);

/*
 # Safety
 `result` must be a live result handle; `out` must be writable.
 */
enum SlowechoStatus slowecho_result_sweep_row(const struct SlowechoResult *result,
                                              uintptr_t index,
                                              struct SlowechoSweepRow *out);

/*
 # Safety
 `result` must be null or a handle from [`slowecho_run`] not yet freed.
 */
void slowecho_result_free(struct SlowechoResult *result);

/*
 Fits y = A·exp[B(τ − C)] to `n` points; `c_mode` is "fixed:X" or "min-tau".

 # Safety
 `tau` and `y` must point to `n` readable doubles; `c_mode` must be a
 NUL-terminated string; `out` must be writable.
 */
enum SlowechoStatus slowecho_fit_exponential(const double *tau,
                                             const double *y,
                                             uintptr_t n,
                                             const char *c_mode,
                                             struct SlowechoFit *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SLOWECHO_H */
