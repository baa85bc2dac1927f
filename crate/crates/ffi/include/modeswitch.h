#ifndef MODESWITCH_H
#define MODESWITCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_UTF8 = 2,
  MS_STATUS_CONFIG = 3,
  MS_STATUS_INVALID_ARGUMENT = 4,
  MS_STATUS_INVALID_STATE = 5,
  MS_STATUS_NUMERICAL = 6,
  MS_STATUS_STALLED = 7,
  MS_STATUS_IO = 8,
  MS_STATUS_FINISHED = 9,
  MS_STATUS_PANIC = 10,
} MsStatus;

typedef enum MsMode {
  MS_MODE_AUTON = 0,
  MS_MODE_MANUAL = 1,
  MS_MODE_STOPPED = 2,
} MsMode;

/**
 * Opaque simulation configuration.
 */
typedef struct MsConfig MsConfig;

/**
 * Opaque trip in progress.
 */
typedef struct MsTrip MsTrip;

/**
 * One interval as seen from C.
 */
typedef struct MsStep {
  uint64_t interval;
  uint64_t position;
  uint64_t end_position;
  /**
   * An `MsMode` value.
   */
  uint8_t mode;
  uint8_t speed;
  bool driver_distracted;
  double p_distracted;
  double utility;
  uint32_t skids;
  uint32_t crashes;
  bool rti_issued;
  bool rti_completed;
  bool rti_aborted;
  uint32_t warnings;
} MsStep;

/**
 * Headline metrics of a trip.
 */
typedef struct MsTripMetrics {
  double utility;
  uint64_t intervals;
  double auton_fraction;
  double manual_fraction;
  double stopped_fraction;
  uint32_t rti_issued;
  uint32_t rti_completed;
  uint32_t rti_aborted;
  double aborted_proportion;
  uint32_t skids;
  uint32_t crashes;
  uint32_t crashes_auton;
  uint32_t crashes_manual_distracted;
  uint32_t rock_stops;
} MsTripMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the configuration schema this library reads.
 */
uint32_t ms_schema_version(void);

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into the library on the same
 * thread.
 */
const char *ms_last_error(void);

/**
 * Loads a built-in profile (`paper-baseline`, `safer`) or a TOML file path.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be writable.
 */
enum MsStatus ms_config_load(const char *source, struct MsConfig **out);

/**
 * Parses a configuration from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum MsStatus ms_config_from_toml(const char *toml, struct MsConfig **out);

/**
 * Serializes the configuration to TOML; release with [`ms_string_free`].
 *
 * # Safety
 * `config` must come from this library; `out` must be writable.
 */
enum MsStatus ms_config_to_toml(const struct MsConfig *config, char **out);

/**
 * # Safety
 * `config` must come from this library and not be used afterwards.
 */
void ms_config_free(struct MsConfig *config);

/**
 * Generates a road from the configuration and starts a trip on it.
 *
 * # Safety
 * `config` must come from this library; `out` must be writable.
 */
enum MsStatus ms_trip_new(const struct MsConfig *config, uint64_t seed, struct MsTrip **out);

/**
 * Advances one interval. Returns [`MsStatus::Finished`] without touching
 * `out` once the last cell is reached.
 *
 * # Safety
 * `trip` must come from this library; `out` may be NULL.
 */
enum MsStatus ms_trip_step(struct MsTrip *trip, struct MsStep *out);

/**
 * Runs the remaining intervals.
 *
 * # Safety
 * `trip` must come from this library.
 */
enum MsStatus ms_trip_run(struct MsTrip *trip);

/**
 * # Safety
 * `trip` must come from this library; `out` must be writable.
 */
enum MsStatus ms_trip_is_finished(const struct MsTrip *trip, bool *out);

/**
 * Metrics of the intervals run so far.
 *
 * # Safety
 * `trip` must come from this library; `out` must be writable.
 */
enum MsStatus ms_trip_metrics(const struct MsTrip *trip, struct MsTripMetrics *out);

/**
 * The trace so far as JSON lines; release with [`ms_string_free`].
 *
 * # Safety
 * `trip` must come from this library; `out` must be writable.
 */
enum MsStatus ms_trip_trace_json(const struct MsTrip *trip, char **out);

/**
 * # Safety
 * `trip` must come from this library and not be used afterwards.
 */
void ms_trip_free(struct MsTrip *trip);

/**
 * Runs a whole trip and reports its metrics.
 *
 * # Safety
 * `config` must come from this library; `out` must be writable.
 */
enum MsStatus ms_run_trip(const struct MsConfig *config, uint64_t seed, struct MsTripMetrics *out);

/**
 * # Safety
 * `s` must be a string returned by this library, or NULL.
 */
void ms_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODESWITCH_H */
