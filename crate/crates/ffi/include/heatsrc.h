#ifndef HEATSRC_H
#define HEATSRC_H

/* Generated by cbindgen from the heatsrc-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Disable the removal sweep for this run.
#define HS_RUN_NO_THINNING 1

// Scale noise by the l2 norm of the clean signal instead of its RMS.
#define HS_RUN_LITERAL_NOISE_NORM 2

// Status codes returned by every fallible entry point.
typedef enum {
  HsOk = 0,
  HsNullPointer = 1,
  HsInvalidUtf8 = 2,
  HsConfigError = 3,
  HsIoError = 4,
  HsNumericsError = 5,
  HsPanic = 6,
} HsStatus;

// An assembled experiment: config, mesh, observation operator and data
// generator. Create with hs_experiment_new, release with
// hs_experiment_free.
typedef struct HsExperiment HsExperiment;

// The outcome of one run: recovered sources and summary metrics. Release
// with hs_result_free.
typedef struct HsResult HsResult;

// Copy the message of the most recent error on this thread into `buf`
// (NUL terminated, truncated to `cap` bytes). Returns the full message
// length in bytes, excluding the terminator; 0 means no recorded error.
//
// # Safety
// `buf` must point to `cap` writable bytes, or be null (query mode).
size_t hs_last_error(char *buf, size_t cap);

// Load a TOML run configuration and assemble the experiment.
//
// # Safety
// `config_path` must be a NUL-terminated string and `out` a valid
// pointer; on success `*out` owns the experiment.
HsStatus hs_experiment_new(const char *config_path, HsExperiment **out);

// Run the chain for one seed with the given flag bits (HS_RUN_*).
//
// # Safety
// `exp` must come from hs_experiment_new and `out` must be valid; on
// success `*out` owns the result.
HsStatus hs_experiment_run(const HsExperiment *exp, uint64_t seed, uint32_t flags, HsResult **out);

// Number of recovered sources; 0 if `res` is null.
//
// # Safety
// `res` must be null or a pointer from hs_experiment_run.
size_t hs_result_source_count(const HsResult *res);

// Fetch one recovered source by index.
//
// # Safety
// `res` must come from hs_experiment_run; `x`, `y`, `intensity` must be
// valid writable pointers.
HsStatus hs_result_source(const HsResult *res,
                          size_t index,
                          double *x,
                          double *y,
                          double *intensity);

// Relative error of the recovered weights against the configured truth.
//
// # Safety
// `res` must come from hs_experiment_run; `out` must be writable.
HsStatus hs_result_relative_error(const HsResult *res, double *out);

// Final relative data misfit ||K(f) - g|| / ||g||.
//
// # Safety
// `res` must come from hs_experiment_run; `out` must be writable.
HsStatus hs_result_final_misfit(const HsResult *res, double *out);

// Mean pCN acceptance rate over the whole run.
//
// # Safety
// `res` must come from hs_experiment_run; `out` must be writable.
HsStatus hs_result_acceptance_rate(const HsResult *res, double *out);

// Release an experiment. Null is a no-op.
//
// # Safety
// `exp` must be null or a pointer from hs_experiment_new, not yet freed.
void hs_experiment_free(HsExperiment *exp);

// Release a result. Null is a no-op.
//
// # Safety
// `res` must be null or a pointer from hs_experiment_run, not yet freed.
void hs_result_free(HsResult *res);

#endif  /* HEATSRC_H */
