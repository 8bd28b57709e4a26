#ifndef STREAKLAB_H
#define STREAKLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_NO_FRINGES = 3,
  SL_STATUS_INSUFFICIENT_EVENTS = 4,
  SL_STATUS_NON_CONVERGENCE = 5,
  SL_STATUS_RESOURCE_LIMIT = 6,
  SL_STATUS_PARSE = 7,
  SL_STATUS_CONFIG = 8,
  SL_STATUS_IO = 9,
  SL_STATUS_BUFFER_TOO_SMALL = 10,
  SL_STATUS_PANIC = 11,
} SlStatus;

typedef enum SlHigherEnergy {
  SL_HIGHER_ENERGY_UNDETERMINED = 0,
  SL_HIGHER_ENERGY_CHEB = 1,
  SL_HIGHER_ENERGY_OXEB = 2,
} SlHigherEnergy;

typedef enum SlOrientation {
  SL_ORIENTATION_OXEB_POSITIVE = 0,
  SL_ORIENTATION_CHEB_POSITIVE = 1,
} SlOrientation;

/**
 * Experiment configuration.
 */
typedef struct SlConfig SlConfig;

/**
 * One exposure: events plus binned image.
 */
typedef struct SlInterferogram SlInterferogram;

typedef struct SlFringeEstimate {
  double spatial_freq_cyc_per_mm;
  double spatial_freq_stderr;
  double slope_mm_per_ns;
  double slope_stderr;
  double slope_uncertainty;
  double beat_freq_mhz;
  double beat_freq_stderr_mhz;
  double delta_nu_mhz;
  double visibility;
  double visibility_stderr;
  double phase0_rad;
  double residual_rms;
  uint64_t n_events;
  double overlap_ns;
  double fit_start_ns;
  double fit_end_ns;
  double fourier_limit_mhz;
  double t_spread_ns;
  double y_spread_mm;
  double peak_ratio;
  uint32_t iterations;
  /**
   * 0 = oxeb-positive, 1 = cheb-positive.
   */
  uint32_t orientation;
} SlFringeEstimate;

typedef struct SlVerdict {
  enum SlHigherEnergy higher_energy;
  double confidence;
  double threshold;
} SlVerdict;

typedef struct SlBudget {
  double photons_per_ns_at_detector;
  double detected_per_ns;
  double detected_per_ns_quoted;
  double sql_phase_rad;
  double sql_phase_rad_quoted;
  double fringe_pos_uncertainty_um;
  double fringe_pos_uncertainty_um_quoted;
  double sql_vs_measurement;
  double sql_vs_measurement_quoted;
  double fourier_dnu_mhz;
  double st_linewidth_hz;
  double distinguishability_ns;
} SlBudget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sl_version(void);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SlStatus sl_config_new(struct SlConfig **out);

/**
 * Parses a TOML configuration. `strict != 0` rejects unknown keys.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SlStatus sl_config_from_toml(const char *toml, int32_t strict, struct SlConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards. Null is ignored.
 */
void sl_config_free(struct SlConfig *cfg);

/**
 * # Safety
 * `cfg` must be a valid handle.
 */
enum SlStatus sl_config_set_seed(struct SlConfig *cfg, uint64_t seed);

/**
 * Fixes `ν₂ − ν₁` at `delta_nu_mhz` and disables shot-to-shot drift.
 *
 * # Safety
 * `cfg` must be a valid handle.
 */
enum SlStatus sl_config_set_detuning(struct SlConfig *cfg, double delta_nu_mhz);

/**
 * Simulates shot `shot_index` of the configured run.
 *
 * # Safety
 * `cfg` must be a valid handle and `out` a valid pointer.
 */
enum SlStatus sl_simulate_shot(const struct SlConfig *cfg,
                               uint64_t shot_index,
                               struct SlInterferogram **out);

/**
 * Reads an event file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SlStatus sl_interferogram_read(const char *path, struct SlInterferogram **out);

/**
 * Writes the events in the text event format.
 *
 * # Safety
 * `ig` must be a valid handle and `path` a NUL-terminated string.
 */
enum SlStatus sl_interferogram_write(const struct SlInterferogram *ig, const char *path);

/**
 * # Safety
 * `ig` must come from this library and not be used afterwards. Null is ignored.
 */
void sl_interferogram_free(struct SlInterferogram *ig);

/**
 * Number of events, or 0 for a null handle.
 *
 * # Safety
 * `ig` must be a valid handle or null.
 */
size_t sl_interferogram_event_count(const struct SlInterferogram *ig);

/**
 * Copies event coordinates into `t_ns` and `y_mm`, each of length `capacity`.
 *
 * # Safety
 * The buffers must hold `capacity` doubles.
 */
enum SlStatus sl_interferogram_events(const struct SlInterferogram *ig,
                                      double *t_ns,
                                      double *y_mm,
                                      size_t capacity);

/**
 * Image dimensions: time bins and y bins.
 *
 * # Safety
 * All pointers must be valid.
 */
enum SlStatus sl_interferogram_image_size(const struct SlInterferogram *ig,
                                          size_t *t_bins,
                                          size_t *y_bins);

/**
 * Copies the count image, row-major with y rows of `t_bins` counts each.
 *
 * # Safety
 * `counts` must hold `capacity` values.
 */
enum SlStatus sl_interferogram_image(const struct SlInterferogram *ig,
                                     uint32_t *counts,
                                     size_t capacity);

/**
 * Ground-truth `ν₂ − ν₁` of a simulated shot. Fails for shots read from disk.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SlStatus sl_interferogram_true_delta_nu(const struct SlInterferogram *ig, double *out);

/**
 * Fits the fringes of one interferogram.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SlStatus sl_estimate_fringes(const struct SlInterferogram *ig, struct SlFringeEstimate *out);

/**
 * Names the higher-energy source. `threshold <= 0` uses the default of 5.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SlStatus sl_which_path(const struct SlFringeEstimate *est,
                            double threshold,
                            struct SlVerdict *out);

/**
 * Photon and uncertainty budget for the configuration's budget section.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SlStatus sl_compute_budget(const struct SlConfig *cfg, struct SlBudget *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STREAKLAB_H */
