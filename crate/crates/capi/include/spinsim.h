#ifndef SPINSIM_H
#define SPINSIM_H

/* Generated by cbindgen from spinsim-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Call outcome.
typedef enum {
  SPINSIM_STATUS_OK = 0,
  // A required pointer was NULL.
  SPINSIM_STATUS_NULL_POINTER = 1,
  // An argument violated a precondition or failed validation.
  SPINSIM_STATUS_INVALID_ARGUMENT = 2,
  // A numerical routine failed to converge or overflowed its cutoff.
  SPINSIM_STATUS_NUMERICAL_ERROR = 3,
  // A string was not valid UTF-8.
  SPINSIM_STATUS_UTF8_ERROR = 4,
  // The library panicked internally; see the last error message.
  SPINSIM_STATUS_INTERNAL_ERROR = 5,
} SpinsimStatus;

// Transition selector for `spinsim_flop_signal`.
typedef enum {
  SPINSIM_TRANSITION_CARRIER = 0,
  SPINSIM_TRANSITION_RED_SIDEBAND = 1,
  SPINSIM_TRANSITION_BLUE_SIDEBAND = 2,
} SpinsimTransition;

// Opaque simulated dataset.
typedef struct SpinsimDataset SpinsimDataset;

// Opaque phonon number distribution.
typedef struct SpinsimDistribution SpinsimDistribution;

// Opaque reconstruction result.
typedef struct SpinsimReconstruction SpinsimReconstruction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library, static storage.
const char *spinsim_version(void);

// Thread-local message describing the most recent error on this thread.
// Valid until the next failing call on the same thread.
const char *spinsim_last_error_message(void);

// Lamb-Dicke factor k_eff·√(ħ/(2mω)).
//
// # Safety
// `out` must point to a writable double.
SpinsimStatus spinsim_lamb_dicke_factor(double k_eff,
                                        double mode_frequency,
                                        double ion_mass,
                                        double *out);

// Raman Rabi frequency |Ω1Ω2/(2Δ)|.
//
// # Safety
// `out` must point to a writable double.
SpinsimStatus spinsim_raman_rabi_frequency(double omega1, double omega2, double delta, double *out);

// Off-resonant excitation probability Ω²/(2Δ²).
//
// # Safety
// `out` must point to a writable double.
SpinsimStatus spinsim_scattering_probability(double omega, double delta, double *out);

// AC-Stark shift Ω²/(4Δ).
//
// # Safety
// `out` must point to a writable double.
SpinsimStatus spinsim_ac_stark_shift(double omega, double delta, double *out);

// Sideband matrix element ratio Ω_{n,m}/Ω0 (signed).
//
// # Safety
// `out` must point to a writable double.
SpinsimStatus spinsim_sideband_matrix_element(uint32_t n, uint32_t m, double eta, double *out);

// Two-level transfer probability Ω²/(Ω²+δ²)·sin²(√(Ω²+δ²)t/2).
//
// # Safety
// `out` must point to a writable double.
SpinsimStatus spinsim_generalized_rabi_transfer(double omega,
                                                double detuning,
                                                double t,
                                                double *out);

// Thermal distribution P_n = n̄ⁿ/(n̄+1)ⁿ⁺¹ truncated at `cutoff`.
//
// # Safety
// `out` must point to a writable handle slot; free with
// `spinsim_distribution_free`.
SpinsimStatus spinsim_thermal_distribution(double nbar, uint32_t cutoff, SpinsimDistribution **out);

// Build a distribution from `len` non-negative weights (renormalized).
//
// # Safety
// `weights` must point to `len` readable doubles; `out` to a writable slot.
SpinsimStatus spinsim_distribution_from_weights(const double *weights,
                                                size_t len,
                                                SpinsimDistribution **out);

// Number of Fock levels (cutoff + 1) carried by the distribution.
//
// # Safety
// `dist` must be a live handle from this library.
size_t spinsim_distribution_len(const SpinsimDistribution *dist);

// Copy the probabilities into `buf` (must hold `len` doubles as reported by
// `spinsim_distribution_len`).
//
// # Safety
// `dist` must be live; `buf` must point to `len` writable doubles.
SpinsimStatus spinsim_distribution_copy(const SpinsimDistribution *dist, double *buf, size_t len);

// Mean phonon number Σ n·P_n.
//
// # Safety
// `dist` must be a live handle.
double spinsim_distribution_mean(const SpinsimDistribution *dist);

// Evolve the distribution under the constant-rate heating master equation
// for time `t` (seconds), in place.
//
// # Safety
// `dist` must be a live, exclusively held handle.
SpinsimStatus spinsim_apply_heating(SpinsimDistribution *dist, double rate_per_s, double t);

// Release a distribution handle.
//
// # Safety
// `dist` must come from this library and not be used afterwards.
void spinsim_distribution_free(SpinsimDistribution *dist);

// Damped sideband-flopping signal P↓(t) for `len` time samples.
//
// # Safety
// `dist` must be live; `times` must hold `len` readable doubles and `out`
// `len` writable doubles.
SpinsimStatus spinsim_flop_signal(const SpinsimDistribution *dist,
                                  double base_rabi_frequency,
                                  double lamb_dicke,
                                  SpinsimTransition transition,
                                  double decay_rate,
                                  double contrast,
                                  const double *times,
                                  size_t len,
                                  double *out);

// Reconstruct {P_n, A, γ} from a uniformly sampled trace.
//
// `times_s`/`p_down` hold `len` samples; `shots` is the per-point shot count
// (used by the bootstrap); the dictionary holds levels 0..=n_max.
//
// # Safety
// Array arguments must match `len`; `out` must be a writable handle slot.
// Free with `spinsim_reconstruction_free`.
SpinsimStatus spinsim_reconstruct(const double *times_s,
                                  const double *p_down,
                                  size_t len,
                                  uint32_t shots,
                                  double omega0,
                                  double eta,
                                  uint32_t n_max,
                                  double init_contrast,
                                  double init_decay_rate,
                                  uint32_t bootstrap_resamples,
                                  uint64_t seed,
                                  SpinsimReconstruction **out);

// Number of reconstructed levels.
//
// # Safety
// `rec` must be a live handle.
size_t spinsim_reconstruction_len(const SpinsimReconstruction *rec);

// Copy the reconstructed probabilities into `buf`.
//
// # Safety
// `rec` must be live; `buf` must hold `len` writable doubles.
SpinsimStatus spinsim_reconstruction_probabilities(const SpinsimReconstruction *rec,
                                                   double *buf,
                                                   size_t len);

// Scalar accessors of a reconstruction.
//
// # Safety
// `rec` must be a live handle.
double spinsim_reconstruction_nbar(const SpinsimReconstruction *rec);

// Fitted readout contrast A.
//
// # Safety
// `rec` must be a live handle.
double spinsim_reconstruction_contrast(const SpinsimReconstruction *rec);

// Fitted coherence decay rate γ (1/s).
//
// # Safety
// `rec` must be a live handle.
double spinsim_reconstruction_decay_rate(const SpinsimReconstruction *rec);

// Residual 2-norm of the fit.
//
// # Safety
// `rec` must be a live handle.
double spinsim_reconstruction_residual(const SpinsimReconstruction *rec);

// Release a reconstruction handle.
//
// # Safety
// `rec` must come from this library and not be used afterwards.
void spinsim_reconstruction_free(SpinsimReconstruction *rec);

// Run the full experimental sequence from a TOML config string.
//
// # Safety
// `config_toml` must be a NUL-terminated string; `out` a writable handle
// slot. Free with `spinsim_dataset_free`.
SpinsimStatus spinsim_sequence_run(const char *config_toml, SpinsimDataset **out);

// Number of traces in the dataset.
//
// # Safety
// `ds` must be a live handle.
size_t spinsim_dataset_trace_count(const SpinsimDataset *ds);

// Number of scan points in trace `trace_idx`.
//
// # Safety
// `ds` must be a live handle.
size_t spinsim_dataset_trace_len(const SpinsimDataset *ds, size_t trace_idx);

// Copy one trace into caller buffers (each holding `len` elements as
// reported by `spinsim_dataset_trace_len`). Any output pointer may be NULL
// to skip that column.
//
// # Safety
// Non-NULL buffers must hold `len` writable elements of the right type.
SpinsimStatus spinsim_dataset_trace_copy(const SpinsimDataset *ds,
                                         size_t trace_idx,
                                         double *axis,
                                         double *p_down,
                                         uint32_t *shots,
                                         uint32_t *successes,
                                         size_t len);

// Release a dataset handle.
//
// # Safety
// `ds` must come from this library and not be used afterwards.
void spinsim_dataset_free(SpinsimDataset *ds);

// Weighted linear heating fit through `len` (delay_s, nbar, sigma) points.
// `sigmas` may be NULL for an unweighted fit.
//
// # Safety
// `delays_s`/`nbars` (and `sigmas` when non-NULL) must hold `len` readable
// doubles; the out pointers may be NULL to skip.
SpinsimStatus spinsim_heating_rate_fit(const double *delays_s,
                                       const double *nbars,
                                       const double *sigmas,
                                       size_t len,
                                       double *rate_out,
                                       double *rate_stderr_out,
                                       double *intercept_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINSIM_H */
