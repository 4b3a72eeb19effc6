#ifndef IRSPLAN_H
#define IRSPLAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum IrsStatus {
  IRS_STATUS_OK = 0,
  IRS_STATUS_NULL_POINTER = 1,
  IRS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Bad configuration, unparsable input or an unsupported file version.
   */
  IRS_STATUS_CONFIG = 3,
  /**
   * Solver or fitting failure.
   */
  IRS_STATUS_NUMERICAL = 4,
  /**
   * No trajectory satisfies the constraints.
   */
  IRS_STATUS_INFEASIBLE = 5,
  IRS_STATUS_PANIC = 6,
} IrsStatus;

/**
 * Initial solution that seeded a plan.
 */
typedef enum IrsInitLabel {
  IRS_INIT_LABEL_MIN_ENERGY = 0,
  IRS_INIT_LABEL_MAX_RATE = 1,
} IrsInitLabel;

/**
 * Opaque fitted-model handle.
 */
typedef struct IrsModel IrsModel;

/**
 * Opaque planning result.
 */
typedef struct IrsPlan IrsPlan;

/**
 * Opaque scenario handle.
 */
typedef struct IrsScenario IrsScenario;

/**
 * SCO settings passed by value.
 */
typedef struct IrsScoOptions {
  double epsilon;
  uint32_t n_it_max;
  double trust_radius;
  double grid_spacing;
} IrsScoOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t irs_last_error(char *buf, size_t len);

/**
 * The bundled desk-scale scenario.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum IrsStatus irs_scenario_reference(struct IrsScenario **out);

/**
 * Parses a scenario TOML document.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` valid for a pointer write.
 */
enum IrsStatus irs_scenario_from_toml(const char *toml, struct IrsScenario **out);

/**
 * Overrides the IRS size and rate target (bits/s) of a scenario in place.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum IrsStatus irs_scenario_set_link(struct IrsScenario *scenario,
                                     uint32_t irs_elements,
                                     double r_min_bits_s);

/**
 * Number of slots `K`; trajectories have `K + 1` waypoints.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t irs_scenario_slots(const struct IrsScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a handle not yet freed.
 */
void irs_scenario_free(struct IrsScenario *scenario);

/**
 * Motion energy of a trajectory given as `n` interleaved `(x, y)` pairs.
 *
 * # Safety
 * `xy` must be valid for `2 n` reads; `out` for one write.
 */
enum IrsStatus irs_motion_energy(const struct IrsScenario *scenario,
                                 const double *xy,
                                 size_t n,
                                 double *out);

/**
 * Builds an `nx × ny` radio map with `draws` channel draws per cell and fits
 * the per-class SNR model to it.
 *
 * # Safety
 * `scenario` must be a live handle; `out` valid for a pointer write.
 */
enum IrsStatus irs_model_fit(const struct IrsScenario *scenario,
                             uint32_t nx,
                             uint32_t ny,
                             uint32_t draws,
                             uint64_t seed,
                             struct IrsModel **out);

/**
 * Parses a model file's TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` valid for a pointer write.
 */
enum IrsStatus irs_model_from_toml(const char *toml, struct IrsModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void irs_model_free(struct IrsModel *model);

/**
 * Default SCO settings.
 */
struct IrsScoOptions irs_sco_options_default(void);

/**
 * Selects an initial solution and optimizes it. Returns
 * [`IrsStatus::Infeasible`] (and leaves `*out` null) when no initial
 * candidate satisfies the constraints.
 *
 * # Safety
 * `scenario` and `model` must be live handles; `out` valid for a pointer write.
 */
enum IrsStatus irs_plan(const struct IrsScenario *scenario,
                        const struct IrsModel *model,
                        struct IrsScoOptions options,
                        struct IrsPlan **out);

/**
 * Number of waypoints of a plan.
 *
 * # Safety
 * `plan` must be null or a live handle.
 */
size_t irs_plan_len(const struct IrsPlan *plan);

/**
 * Copies up to `cap` waypoints as interleaved `(x, y)` pairs into `xy`
 * (which must hold `2 cap` doubles). Returns the number copied.
 *
 * # Safety
 * `plan` must be a live handle and `xy` valid for `2 cap` writes.
 */
size_t irs_plan_waypoints(const struct IrsPlan *plan, double *xy, size_t cap);

/**
 * Final motion energy in joules (NaN for a null handle).
 *
 * # Safety
 * `plan` must be null or a live handle.
 */
double irs_plan_energy(const struct IrsPlan *plan);

/**
 * Average rate of the final trajectory under the fitted model, bits/s.
 *
 * # Safety
 * `plan` must be null or a live handle.
 */
double irs_plan_rate(const struct IrsPlan *plan);

/**
 * SCO iterations performed.
 *
 * # Safety
 * `plan` must be null or a live handle.
 */
size_t irs_plan_iterations(const struct IrsPlan *plan);

/**
 * # Safety
 * `plan` must be a live handle.
 */
enum IrsInitLabel irs_plan_initial_label(const struct IrsPlan *plan);

/**
 * # Safety
 * `plan` must be null or a handle not yet freed.
 */
void irs_plan_free(struct IrsPlan *plan);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRSPLAN_H */
