#ifndef WTOMO_H
#define WTOMO_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum WtomoStatus {
  WTOMO_STATUS_OK = 0,
  WTOMO_STATUS_NULL_POINTER = 1,
  WTOMO_STATUS_INVALID_ARGUMENT = 2,
  WTOMO_STATUS_SOLVER_FAILURE = 3,
  WTOMO_STATUS_PARSE = 4,
  WTOMO_STATUS_IO = 5,
  WTOMO_STATUS_PANIC = 6,
} WtomoStatus;

typedef enum WtomoSolver {
  WTOMO_SOLVER_VECTOR = 0,
  WTOMO_SOLVER_MATRIX = 1,
  WTOMO_SOLVER_TENSOR = 2,
} WtomoSolver;

// Dense real field of order 1 to 4, last index fastest.
typedef struct WtomoField WtomoField;

// Outcome of a single reconstruction.
typedef struct WtomoReport WtomoReport;

// Experiment description: grid, nodes, obstructions, sampling and solver settings.
typedef struct WtomoScenario WtomoScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *wtomo_last_error(void);

// Loads a built-in scenario by name (`d2`, `d3` or `d4`).
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum WtomoStatus wtomo_scenario_preset(const char *name, struct WtomoScenario **out);

// Loads a scenario file. A preset name is accepted as a fallback.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum WtomoStatus wtomo_scenario_load(const char *path, struct WtomoScenario **out);

// Parses a scenario from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum WtomoStatus wtomo_scenario_from_toml(const char *toml, struct WtomoScenario **out);

// # Safety
// `scenario` must be null or a handle from this library that has not been freed.
void wtomo_scenario_free(struct WtomoScenario *scenario);

// Writes the field order to `order` and its extents to `dims[0..order]`.
// `dims` must have room for four entries.
//
// # Safety
// All pointers must be valid; `dims` must point to at least four `size_t`.
enum WtomoStatus wtomo_scenario_field_shape(const struct WtomoScenario *scenario,
                                            size_t *dims,
                                            size_t *order);

// Sets the total number of measurements, split evenly across intervals.
//
// # Safety
// `scenario` must be a live handle.
enum WtomoStatus wtomo_scenario_set_measurements(struct WtomoScenario *scenario, size_t total);

// Sets the noise standard deviation in dB.
//
// # Safety
// `scenario` must be a live handle.
enum WtomoStatus wtomo_scenario_set_noise(struct WtomoScenario *scenario, double eta);

// Sets the base seed and the number of runs.
//
// # Safety
// `scenario` must be a live handle.
enum WtomoStatus wtomo_scenario_set_seed(struct WtomoScenario *scenario,
                                         uint64_t seed,
                                         size_t runs);

// Builds the ground-truth field of a scenario.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum WtomoStatus wtomo_build_truth(const struct WtomoScenario *scenario, struct WtomoField **out);

// Creates a field from `len` values laid out last index fastest.
//
// # Safety
// `dims` must point to `order` entries and `values` to `len` doubles.
enum WtomoStatus wtomo_field_new(const size_t *dims,
                                 size_t order,
                                 const double *values,
                                 size_t len,
                                 struct WtomoField **out);

// # Safety
// `field` must be null or a handle from this library that has not been freed.
void wtomo_field_free(struct WtomoField *field);

// Number of values in the field, or 0 for a null handle.
//
// # Safety
// `field` must be null or a live handle.
size_t wtomo_field_len(const struct WtomoField *field);

// Order of the field, or 0 for a null handle.
//
// # Safety
// `field` must be null or a live handle.
size_t wtomo_field_order(const struct WtomoField *field);

// Copies the extents into `dims`, which holds `cap` entries.
//
// # Safety
// `field` must be a live handle and `dims` must point to `cap` entries.
enum WtomoStatus wtomo_field_dims(const struct WtomoField *field, size_t *dims, size_t cap);

// Copies the values into `values`, which holds `cap` doubles.
//
// # Safety
// `field` must be a live handle and `values` must point to `cap` doubles.
enum WtomoStatus wtomo_field_values(const struct WtomoField *field, double *values, size_t cap);

// Normalized reconstruction error of `count` estimates against `truth`,
// averaged over the estimates.
//
// # Safety
// `estimates` must point to `count` live field handles.
enum WtomoStatus wtomo_reconstruction_error(const struct WtomoField *truth,
                                            const struct WtomoField *const *estimates,
                                            size_t count,
                                            double *out);

// Simulates run `run` (1-based) of the scenario and reconstructs it with
// `solver`, using the scenario's solver settings.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum WtomoStatus wtomo_recover(const struct WtomoScenario *scenario,
                               enum WtomoSolver solver,
                               size_t run,
                               struct WtomoReport **out);

// # Safety
// `report` must be null or a handle from this library that has not been freed.
void wtomo_report_free(struct WtomoReport *report);

// Copies the estimate into a new field handle.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum WtomoStatus wtomo_report_estimate(const struct WtomoReport *report, struct WtomoField **out);

// Normalized error of the estimate against the scenario truth, NaN for null.
//
// # Safety
// `report` must be null or a live handle.
double wtomo_report_error(const struct WtomoReport *report);

// Final objective value, NaN for null.
//
// # Safety
// `report` must be null or a live handle.
double wtomo_report_objective(const struct WtomoReport *report);

// Iterations performed, 0 for null.
//
// # Safety
// `report` must be null or a live handle.
size_t wtomo_report_iterations(const struct WtomoReport *report);

// Whether the stopping rule was met before the iteration cap.
//
// # Safety
// `report` must be null or a live handle.
bool wtomo_report_converged(const struct WtomoReport *report);

// Runs every configured solver over all runs of the scenario and writes the
// per-run CSV to `path`. Returns `SolverFailure` after writing if any run failed.
//
// # Safety
// `scenario` must be a live handle and `path` a NUL-terminated string.
enum WtomoStatus wtomo_run_scenario(const struct WtomoScenario *scenario,
                                    size_t jobs,
                                    const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WTOMO_H */
