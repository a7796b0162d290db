#ifndef RIS_FFI_H
#define RIS_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RisStatus {
  RIS_STATUS_OK = 0,
  RIS_STATUS_NULL_POINTER = 1,
  RIS_STATUS_INVALID_PARAMETER = 2,
  RIS_STATUS_DEGENERATE_GEOMETRY = 3,
  RIS_STATUS_DOMAIN = 4,
  RIS_STATUS_CAPACITY = 5,
  RIS_STATUS_CALIBRATION = 6,
  RIS_STATUS_FORMAT = 7,
  RIS_STATUS_IO = 8,
  RIS_STATUS_BUFFER_TOO_SMALL = 9,
  RIS_STATUS_PANIC = 10,
} RisStatus;

typedef enum RisMode {
  RIS_MODE_PASSIVE = 0,
  RIS_MODE_ACTIVE = 1,
} RisMode;

typedef enum RisElementState {
  RIS_ELEMENT_STATE_PASSIVE_A = 0,
  RIS_ELEMENT_STATE_PASSIVE_B = 1,
  RIS_ELEMENT_STATE_ACTIVE_ON = 2,
  RIS_ELEMENT_STATE_ACTIVE_OFF = 3,
} RisElementState;

/**
 * Field pattern produced by [`ris_scenario_scan`].
 */
typedef struct RisPattern RisPattern;

/**
 * Array, RIS pose, TX/RX placement, reflection model and link budget.
 */
typedef struct RisScenario RisScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ris_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library on this thread.
 */
const char *ris_last_error_message(void);

/**
 * Reference 37-element scenario with RX at the (15°, 30°) target.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum RisStatus ris_scenario_default_new(struct RisScenario **out);

/**
 * Scenario from a NUL-terminated JSON scene document.
 *
 * # Safety
 * `json` must be a valid C string and `out` valid for one handle write.
 */
enum RisStatus ris_scenario_from_json(const char *json, struct RisScenario **out);

/**
 * Releases a scenario. NULL is ignored.
 *
 * # Safety
 * `scenario` must come from `ris_scenario_default_new` or `ris_scenario_from_json` and not be used afterwards.
 */
void ris_scenario_free(struct RisScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle and `out` writable.
 */
enum RisStatus ris_scenario_element_count(const struct RisScenario *scenario, size_t *out);

/**
 * Moves the RX to `range` meters along (azimuth, elevation) in degrees.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum RisStatus ris_scenario_set_rx_direction(struct RisScenario *scenario,
                                             double azimuth_deg,
                                             double elevation_deg,
                                             double range);

/**
 * Designs a configuration steering towards (azimuth, elevation) at the
 * scenario's RX range and writes `element_count` state codes to `out_states`.
 *
 * # Safety
 * `scenario` must be a live handle; `out_states` must hold `capacity` bytes.
 */
enum RisStatus ris_scenario_design(const struct RisScenario *scenario,
                                   uint32_t mode,
                                   double azimuth_deg,
                                   double elevation_deg,
                                   uint8_t *out_states,
                                   size_t capacity);

/**
 * Received power in watts at the scenario's current RX position.
 *
 * # Safety
 * `scenario` must be a live handle, `states` must hold `len` bytes, `out` writable.
 */
enum RisStatus ris_scenario_received_power(const struct RisScenario *scenario,
                                           const uint8_t *states,
                                           size_t len,
                                           double *out);

/**
 * Carrier-frequency field pattern over a `±extent` grid with `spacing`
 * degrees, leaving out `exclude_cone_deg` around the TX (negative keeps all).
 *
 * # Safety
 * `scenario` must be a live handle, `states` must hold `len` bytes, `out` writable.
 */
enum RisStatus ris_scenario_scan(const struct RisScenario *scenario,
                                 const uint8_t *states,
                                 size_t len,
                                 double spacing_deg,
                                 double extent_deg,
                                 double exclude_cone_deg,
                                 struct RisPattern **out);

/**
 * # Safety
 * `pattern` must be a live handle and `out` writable.
 */
enum RisStatus ris_pattern_len(const struct RisPattern *pattern, size_t *out);

/**
 * Point `index` in grid order.
 *
 * # Safety
 * `pattern` must be a live handle; the out pointers must be writable.
 */
enum RisStatus ris_pattern_get(const struct RisPattern *pattern,
                               size_t index,
                               double *azimuth_deg,
                               double *elevation_deg,
                               double *power_w);

/**
 * Releases a pattern. NULL is ignored.
 *
 * # Safety
 * `pattern` must come from [`ris_scenario_scan`] and not be used afterwards.
 */
void ris_pattern_free(struct RisPattern *pattern);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIS_FFI_H */
