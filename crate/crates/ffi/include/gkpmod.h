#ifndef GKPMOD_H
#define GKPMOD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GkpStatus {
  GKP_STATUS_OK = 0,
  GKP_STATUS_NULL_POINTER = 1,
  GKP_STATUS_INVALID_ARGUMENT = 2,
  GKP_STATUS_CONFIG = 3,
  GKP_STATUS_TRUNCATION = 4,
  GKP_STATUS_REGIME = 5,
  GKP_STATUS_ZERO_PROBABILITY = 6,
  GKP_STATUS_NUMERICAL = 7,
  GKP_STATUS_IO = 8,
  GKP_STATUS_PANIC = 9,
} GkpStatus;

/**
 * Code displacement measured by a [`GkpMeasurement`].
 */
typedef enum GkpStabilizer {
  GKP_STABILIZER_SQ = 0,
  GKP_STABILIZER_SP = 1,
  GKP_STABILIZER_Z = 2,
  GKP_STABILIZER_X = 3,
} GkpStabilizer;

/**
 * A configured modular measurement.
 */
typedef struct GkpMeasurement GkpMeasurement;

/**
 * Per-shot random stream.
 */
typedef struct GkpRng GkpRng;

/**
 * Target oscillator state.
 */
typedef struct GkpState GkpState;

typedef struct GkpSqueezing {
  double delta_q;
  double delta_p;
  double mean_photons;
  bool degenerate;
} GkpSqueezing;

typedef struct GkpAncilla {
  /**
   * Mean photon number of the real coherent amplitude.
   */
  double mean_photons;
  size_t fock_cutoff;
  bool counter_displacement;
  double readout_efficiency;
} GkpAncilla;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *gkp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gkp_version(void);

/**
 * Vacuum of a `dim`-level target.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum GkpStatus gkp_state_vacuum(size_t dim, struct GkpState **out);

/**
 * Squeezed vacuum with the given Δ_q.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum GkpStatus gkp_state_squeezed(size_t dim, double delta_q, struct GkpState **out);

/**
 * Coherent state |re + i·im⟩.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum GkpStatus gkp_state_coherent(size_t dim, double re, double im, struct GkpState **out);

/**
 * # Safety
 * `state` must be null or a handle from this library not yet freed.
 */
void gkp_state_free(struct GkpState *state);

/**
 * Fock dimension of the state, 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t gkp_state_dim(const struct GkpState *state);

/**
 * Effective squeezing report of the state.
 *
 * # Safety
 * `state` must be a live handle and `out` writable.
 */
enum GkpStatus gkp_state_squeezing(const struct GkpState *state, struct GkpSqueezing *out);

/**
 * Random stream keyed by (seed, stream name, shot index).
 *
 * # Safety
 * `stream` must be a NUL-terminated UTF-8 string and `out` writable.
 */
enum GkpStatus gkp_rng_new(uint64_t seed, const char *stream, uint64_t shot, struct GkpRng **out);

/**
 * # Safety
 * `rng` must be null or a live handle.
 */
void gkp_rng_free(struct GkpRng *rng);

/**
 * Measurement of `stabilizer` on a `dim`-level target.
 *
 * # Safety
 * `ancilla` must point to a valid [`GkpAncilla`] and `out` be writable.
 */
enum GkpStatus gkp_measurement_new(enum GkpStabilizer stabilizer,
                                   const struct GkpAncilla *ancilla,
                                   size_t dim,
                                   struct GkpMeasurement **out);

/**
 * # Safety
 * `m` must be null or a live handle.
 */
void gkp_measurement_free(struct GkpMeasurement *m);

/**
 * Outcome density P(β) for the given input state.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum GkpStatus gkp_measurement_density(const struct GkpMeasurement *m,
                                       const struct GkpState *state,
                                       double beta_re,
                                       double beta_im,
                                       double *out);

/**
 * Most likely outcome β for the given input state.
 *
 * # Safety
 * Handles must be live and the outputs writable.
 */
enum GkpStatus gkp_measurement_max_likelihood(const struct GkpMeasurement *m,
                                              const struct GkpState *state,
                                              double *beta_re,
                                              double *beta_im);

/**
 * Draws an outcome β from P(β).
 *
 * # Safety
 * Handles must be live and the outputs writable.
 */
enum GkpStatus gkp_measurement_sample(const struct GkpMeasurement *m,
                                      const struct GkpState *state,
                                      struct GkpRng *rng,
                                      double *beta_re,
                                      double *beta_im);

/**
 * Normalized post-measurement state for outcome β, as a new handle, and
 * the outcome density.
 *
 * # Safety
 * Handles must be live and the outputs writable; `density` may be null.
 */
enum GkpStatus gkp_measurement_apply(const struct GkpMeasurement *m,
                                     const struct GkpState *state,
                                     double beta_re,
                                     double beta_im,
                                     struct GkpState **out,
                                     double *density);

/**
 * `1/√(4πα²)` and `1/√(4πα√(1+α²))`.
 *
 * # Safety
 * Outputs must be writable.
 */
enum GkpStatus gkp_expected_squeezing(double alpha, double *estimate, double *lower_bound);

/**
 * First `n` sine coefficients b_n of the flux drive with depth δ.
 *
 * # Safety
 * `out` must point to `n` writable doubles.
 */
enum GkpStatus gkp_drive_coefficients(double delta, double f_t, size_t n, double *out);

/**
 * Runs a CLI command (`"fig-scaling"`, `"params"`, ...) with a TOML config
 * string, writing its files into `out_dir`.
 *
 * # Safety
 * All arguments must be NUL-terminated UTF-8 strings; `config_toml` may be
 * null for the defaults.
 */
enum GkpStatus gkp_run_command(const char *command, const char *config_toml, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GKPMOD_H */
