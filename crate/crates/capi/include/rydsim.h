#ifndef RYDSIM_H
#define RYDSIM_H

/* Generated by cbindgen from the rydsim-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a C API call.
typedef enum RydsimStatus {
  // The call succeeded.
  RYDSIM_STATUS_OK = 0,
  // A required pointer argument was NULL.
  RYDSIM_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  RYDSIM_STATUS_INVALID_UTF8 = 2,
  // The configuration could not be loaded or failed validation.
  RYDSIM_STATUS_INVALID_CONFIG = 3,
  // A scalar argument was out of range for the operation.
  RYDSIM_STATUS_INVALID_ARGUMENT = 4,
  // The simulation or solve failed; see `rydsim_last_error`.
  RYDSIM_STATUS_RUN_FAILED = 5,
  // The output buffer is too small for the requested data.
  RYDSIM_STATUS_BUFFER_TOO_SMALL = 6,
  // An internal invariant was violated (a bug worth reporting).
  RYDSIM_STATUS_INTERNAL = 7,
} RydsimStatus;

// Opaque experiment configuration; create with one of the
// `rydsim_config_*` constructors and release with `rydsim_config_free`.
typedef struct RydsimConfig RydsimConfig;

// Drive and damping parameters of one atom, shared by both solve kernels.
// `levels` selects the scheme: 2 for a driven two-level atom (the ladder
// fields `omega23`, `gamma32`, `deph32` must be zero), 3 for the full
// ladder. Rabi frequencies and rates are angular frequencies in MHz.
typedef struct RydsimDrive {
  // Number of levels, 2 or 3.
  int32_t levels;
  // Rabi frequency of the lower transition.
  double omega12;
  // Rabi frequency of the upper transition (ladder only).
  double omega23;
  // Decay rate of level 2 into level 1.
  double gamma21;
  // Decay rate of level 3 into level 2 (ladder only).
  double gamma32;
  // Extra dephasing rate of the 1-2 coherence.
  double deph21;
  // Extra dephasing rate of the 2-3 coherence (ladder only).
  double deph32;
} RydsimDrive;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Retrieves the error message of the most recent failing call on this
// thread. Returns the size the message needs including the terminator;
// an empty string means no failure has been recorded yet.
size_t rydsim_last_error(char *buf, size_t cap);

// Writes the library version as a NUL-terminated string; returns the size
// the full text needs including the terminator.
size_t rydsim_version(char *buf, size_t cap);

// Creates a configuration from a built-in experiment name (list them with
// the CLI's `presets` subcommand). On success stores a handle in `*out`.
enum RydsimStatus rydsim_config_preset(const char *name, struct RydsimConfig **out);

// Creates a configuration by parsing TOML text.
enum RydsimStatus rydsim_config_from_toml(const char *text, struct RydsimConfig **out);

// Creates a configuration by reading a TOML file.
enum RydsimStatus rydsim_config_from_toml_file(const char *path, struct RydsimConfig **out);

// Releases a configuration handle; NULL is ignored.
void rydsim_config_free(struct RydsimConfig *cfg);

// Sets the master seed of all random streams.
enum RydsimStatus rydsim_config_set_seed(struct RydsimConfig *cfg, uint64_t seed);

// Sets the number of independent chains per spatial realization.
enum RydsimStatus rydsim_config_set_trajectories(struct RydsimConfig *cfg, uint32_t trajectories);

// Sets the number of spatial realizations per scan point.
enum RydsimStatus rydsim_config_set_realizations(struct RydsimConfig *cfg, uint32_t realizations);

// Sets the worker thread count; 0 restores the default of one per core.
enum RydsimStatus rydsim_config_set_workers(struct RydsimConfig *cfg, size_t workers);

// Sets the pair-distance histogram bin width in micrometers.
enum RydsimStatus rydsim_config_set_bin_width(struct RydsimConfig *cfg, double bin_width);

// Enables or disables the single-atom baseline (no exact pairs).
enum RydsimStatus rydsim_config_set_sare(struct RydsimConfig *cfg, bool sare);

// Sets the lower pair-window bound in micrometers; pairs need a
// separation above it.
enum RydsimStatus rydsim_config_set_l_lower(struct RydsimConfig *cfg, double l_lower);

// Sets the upper pair-window bound in micrometers; pairs need a
// separation at or below it.
enum RydsimStatus rydsim_config_set_l_upper(struct RydsimConfig *cfg, double l_upper);

// Enables or disables reuse of steady-state solves for repeated
// parameter values.
enum RydsimStatus rydsim_config_set_memoize(struct RydsimConfig *cfg, bool memoize);

// Enables or disables writing the sampled atom positions of every
// realization alongside the results.
enum RydsimStatus rydsim_config_set_dump_positions(struct RydsimConfig *cfg, bool dump);

// Serializes the configuration as TOML; same buffer contract as
// `rydsim_last_error`.
enum RydsimStatus rydsim_config_to_toml(const struct RydsimConfig *cfg,
                                        char *buf,
                                        size_t cap,
                                        size_t *needed);

// Validates the configuration and runs it, writing CSV results into
// `out_dir` (NULL keeps the configured output directory). Blocks until
// the scan finishes.
enum RydsimStatus rydsim_config_run(const struct RydsimConfig *cfg, const char *out_dir);

// Steady-state populations of one atom driven at effective detuning
// `delta_eff` (MHz). Fills `populations[0..levels]` in level order; `len`
// must be at least `drive->levels`.
enum RydsimStatus rydsim_steady_single(const struct RydsimDrive *drive,
                                       double delta_eff,
                                       double *populations,
                                       size_t len);

// Joint steady-state populations of two coupled atoms at effective
// detunings `delta1`, `delta2` with top-level pair coupling `coupling`
// (all MHz). Fills `populations[0..levels^2]` with the first atom as the
// most significant index; `len` must be at least `levels^2`.
enum RydsimStatus rydsim_steady_pair(const struct RydsimDrive *drive,
                                     double delta1,
                                     double delta2,
                                     double coupling,
                                     double *populations,
                                     size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RYDSIM_H */
