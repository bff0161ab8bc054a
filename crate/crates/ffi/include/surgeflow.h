#ifndef SURGEFLOW_H
#define SURGEFLOW_H

#pragma once

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_INVALID_ARGUMENT = 1,
  SF_STATUS_VALIDATION = 2,
  SF_STATUS_PARSE = 3,
  SF_STATUS_IO = 4,
  SF_STATUS_SOLVER = 5,
  SF_STATUS_NULL_POINTER = 6,
  SF_STATUS_PANIC = 7,
} SfStatus;

/*
 Solver outcome of a run.
 */
typedef enum SfSolveStatus {
  SF_SOLVE_STATUS_OPTIMAL = 0,
  SF_SOLVE_STATUS_INFEASIBLE = 1,
  SF_SOLVE_STATUS_UNBOUNDED = 2,
  SF_SOLVE_STATUS_ITERATION_LIMIT = 3,
} SfSolveStatus;

/*
 A solved scenario.
 */
typedef struct SfRun SfRun;

/*
 A scenario file and the directory its relative paths resolve against.
 */
typedef struct SfScenario SfScenario;

/*
 One patient transfer; indices follow the scenario's location and group
 order, `day` counts from the first scenario day.
 */
typedef struct SfTransfer {
  size_t group;
  size_t from;
  size_t to;
  size_t day;
  double amount;
} SfTransfer;

/*
 Library version as a static nul-terminated string.
 */
const char *sf_version(void);

/*
 Message of the last failed call on this thread, or NULL. Valid until the
 next surgeflow call on the same thread.
 */
const char *sf_last_error_message(void);

/*
 # Safety
 `s` must come from a surgeflow out-pointer and not be freed yet.
 */
void sf_string_free(char *s);

/*
 Reads a scenario JSON file.

 # Safety
 `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum SfStatus sf_scenario_load(const char *path, struct SfScenario **out);

/*
 Parses a scenario from JSON text; relative paths resolve against
 `base_dir`.

 # Safety
 `json` and `base_dir` must be nul-terminated strings and `out` a writable
 pointer.
 */
enum SfStatus sf_scenario_from_json(const char *json,
                                    const char *base_dir,
                                    struct SfScenario **out);

/*
 Replaces top-level scenario fields with those in the JSON object.

 # Safety
 `scenario` must be a live handle and `json` a nul-terminated string.
 */
enum SfStatus sf_scenario_apply_overrides(struct SfScenario *scenario, const char *json);

/*
 # Safety
 `scenario` must be NULL or a live handle, not used afterwards.
 */
void sf_scenario_free(struct SfScenario *scenario);

/*
 Loads the dataset, builds and solves the model and scores the plan.

 # Safety
 `scenario` must be a live handle and `out` a writable pointer.
 */
enum SfStatus sf_solve(const struct SfScenario *scenario, struct SfRun **out);

/*
 # Safety
 `run` must be NULL or a live handle, not used afterwards.
 */
void sf_run_free(struct SfRun *run);

/*
 # Safety
 `run` must be a live handle and `status`/`objective` writable pointers.
 */
enum SfStatus sf_run_solution(const struct SfRun *run,
                              enum SfSolveStatus *status,
                              double *objective);

/*
 Metrics as JSON, byte-identical to the `metrics.json` of a result bundle.

 # Safety
 `run` must be a live handle and `out` a writable pointer.
 */
enum SfStatus sf_run_metrics_json(const struct SfRun *run, char **out);

/*
 # Safety
 `run` must be a live handle and `count` a writable pointer.
 */
enum SfStatus sf_run_transfer_count(const struct SfRun *run, size_t *count);

/*
 # Safety
 `run` must be a live handle and `out` a writable pointer.
 */
enum SfStatus sf_run_transfer(const struct SfRun *run, size_t index, struct SfTransfer *out);

/*
 Writes the result bundle (CSV and JSON files) into `out_dir`.

 # Safety
 `run` must be a live handle and `out_dir` a nul-terminated string.
 */
enum SfStatus sf_run_save(const struct SfRun *run, const char *out_dir);

/*
 Scores the plan in a `transfers.csv` against the scenario and returns the
 metrics JSON.

 # Safety
 `scenario` must be a live handle, `plan_path` a nul-terminated string and
 `out` a writable pointer.
 */
enum SfStatus sf_evaluate_plan(const struct SfScenario *scenario,
                               const char *plan_path,
                               char **out);

/*
 Reconstructs daily admissions from a census series of `len` days.
 `admissions` receives `len` values.

 # Safety
 `census` and `admissions` must hold `len` values, `los_pmf` `los_len`
 values, and `residual` must be writable.
 */
enum SfStatus sf_estimate_admissions(const double *census,
                                     size_t len,
                                     const double *los_pmf,
                                     size_t los_len,
                                     size_t iterations,
                                     uint64_t seed,
                                     double *admissions,
                                     double *residual);

#endif  /* SURGEFLOW_H */
