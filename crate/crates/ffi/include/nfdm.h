#ifndef NFDM_H
#define NFDM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum NfdmPreset {
  // 2000 km link, 800 guard symbols.
  NFDM_PRESET_PAPER = 0,
  // 500 km link, 200 guard symbols.
  NFDM_PRESET_FAST = 1,
} NfdmPreset;

// Result of every fallible call.
typedef enum NfdmStatus {
  NFDM_STATUS_OK = 0,
  NFDM_STATUS_NULL_POINTER = 1,
  NFDM_STATUS_INVALID_ARGUMENT = 2,
  NFDM_STATUS_UNITS_MISMATCH = 3,
  NFDM_STATUS_NON_FINITE = 4,
  NFDM_STATUS_GRID_MISMATCH = 5,
  NFDM_STATUS_UNRECOVERABLE_SPECTRUM = 6,
  NFDM_STATUS_SYNTHESIS_ACCURACY = 7,
  NFDM_STATUS_STEP_TOO_LARGE = 8,
  NFDM_STATUS_FRAME_MISMATCH = 9,
  NFDM_STATUS_IO = 10,
  NFDM_STATUS_PARSE = 11,
  NFDM_STATUS_BUFFER_TOO_SMALL = 12,
  NFDM_STATUS_PANIC = 13,
} NfdmStatus;

// Opaque experiment configuration.
typedef struct NfdmConfig NfdmConfig;

// Opaque continuous nonlinear spectrum on the conjugate grid of a frame.
typedef struct NfdmSpectrum NfdmSpectrum;

// Performance of one operating point. `q_db_ber` is NaN when no bit
// error was counted.
typedef struct NfdmReport {
  double q_db;
  double q_db_ber;
  double ber;
  double evm_snr_db;
  uint64_t symbols;
  uint64_t bit_errors;
  uint64_t repaired_points;
  uint64_t bursts;
} NfdmReport;

typedef struct NfdmComplex {
  double re;
  double im;
} NfdmComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the last failed call on this thread into `buf`
// (NUL-terminated). Returns the size it needs, including the NUL; nothing
// is written when `len` is smaller.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t nfdm_last_error(char *buf, size_t len);

// Creates a configuration from a preset.
//
// # Safety
// `out` must be a valid pointer.
enum NfdmStatus nfdm_config_new(enum NfdmPreset preset, struct NfdmConfig **out);

// Parses a configuration (JSON, or `key = value` lines) on top of the
// paper preset.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum NfdmStatus nfdm_config_parse(const char *text, struct NfdmConfig **out);

// Sets one field by dotted key; the value is a JSON literal or a bare
// string, e.g. `("launch_power_dbm", "-3")` or `("system", "dbp")`.
//
// # Safety
// `config` must come from this library; `key` and `value` must be
// NUL-terminated strings.
enum NfdmStatus nfdm_config_set(struct NfdmConfig *config, const char *key, const char *value);

// Writes the configuration as JSON. See [`nfdm_last_error`] for the
// buffer protocol; `needed` may be null.
//
// # Safety
// `config` must come from this library; `buf` must be null or point to
// `len` writable bytes.
enum NfdmStatus nfdm_config_to_json(const struct NfdmConfig *config,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

// # Safety
// `config` must be null or come from this library, and is invalid
// afterwards.
void nfdm_config_free(struct NfdmConfig *config);

// Runs the configured operating point. `workers = 0` uses every core.
//
// # Safety
// `config` must come from this library and `out` must be valid.
enum NfdmStatus nfdm_run_point(const struct NfdmConfig *config,
                               size_t workers,
                               struct NfdmReport *out);

// Forward NFT of a normalized signal (`n` samples spaced `dt`, first at
// `t_start`) on the conjugate grid `λ_k = -π k / (n dt)`.
//
// # Safety
// `samples` must point to `n` values and `out` must be valid.
enum NfdmStatus nfdm_fnft(const struct NfdmComplex *samples,
                          size_t n,
                          double dt,
                          double t_start,
                          struct NfdmSpectrum **out);

// Number of spectral points.
//
// # Safety
// `spectrum` must be null or come from this library.
size_t nfdm_spectrum_len(const struct NfdmSpectrum *spectrum);

// Copies the λ values and `ρ(λ)` into caller buffers of `len` entries
// each (either may be null).
//
// # Safety
// `spectrum` must come from this library; non-null buffers must hold
// `len` entries.
enum NfdmStatus nfdm_spectrum_read(const struct NfdmSpectrum *spectrum,
                                   double *lambda,
                                   struct NfdmComplex *rho,
                                   size_t len);

// Builds a spectrum on the conjugate grid of an `n`-sample frame spaced
// `dt` from `n` values of `ρ`, ordered as [`nfdm_spectrum_read`] returns
// them.
//
// # Safety
// `rho` must point to `n` values and `out` must be valid.
enum NfdmStatus nfdm_spectrum_new(const struct NfdmComplex *rho,
                                  size_t n,
                                  double dt,
                                  struct NfdmSpectrum **out);

// Backward NFT onto the frame the spectrum's grid belongs to; writes
// `n` samples (the spectrum length) to `out`.
//
// # Safety
// `spectrum` must come from this library and `out` must hold `n` values.
enum NfdmStatus nfdm_bnft(const struct NfdmSpectrum *spectrum,
                          double dt,
                          double t_start,
                          struct NfdmComplex *out,
                          size_t n);

// # Safety
// `spectrum` must be null or come from this library, and is invalid
// afterwards.
void nfdm_spectrum_free(struct NfdmSpectrum *spectrum);

// Dispersive broadening in symbol times; halved per side with
// precompensation.
double nfdm_channel_memory(double beta2,
                           double length,
                           double symbol_rate,
                           double rolloff,
                           bool precompensation);

// `N_b / (N_b + N_z)`.
//
// # Safety
// `out` must be a valid pointer.
enum NfdmStatus nfdm_rate_efficiency(size_t n_b, size_t n_z, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NFDM_H */
