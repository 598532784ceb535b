//! C ABI for the trapped-ion spin-qubit simulator.
//!
//! Conventions: every fallible call returns a [`SpinsimStatus`]; outputs go
//! through pointers. Heap objects are opaque handles released with their
//! `_free` function. `spinsim_last_error_message` returns a thread-local,
//! NUL-terminated description of the most recent failure on this thread.
//!
//! Frequencies are angular (rad/s), times are seconds, exactly as in the
//! underlying crate.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use spinsim::config::SequenceConfig;
use spinsim::dynamics::{flop_signal, DecoherenceModel};
use spinsim::physics::{
    ac_stark_shift, generalized_rabi_transfer, lamb_dicke_factor, raman_rabi_frequency,
    scattering_probability, sideband_matrix_element, thermal_distribution, PhononDistribution,
    TransitionKind, TransitionSpec,
};
use spinsim::sequence::{apply_heating, run_sequence, HeatingModel, RunDataset};
use spinsim::tomography::{
    deconvolve, heating_rate_fit, predict_line_positions, DeconvolveOptions, RabiTrace,
    ReconstructionResult,
};
use spinsim::Error;

/// Call outcome.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SpinsimStatus {
    Ok = 0,
    /// A required pointer was NULL.
    NullPointer = 1,
    /// An argument violated a precondition or failed validation.
    InvalidArgument = 2,
    /// A numerical routine failed to converge or overflowed its cutoff.
    NumericalError = 3,
    /// A string was not valid UTF-8.
    Utf8Error = 4,
    /// The library panicked internally; see the last error message.
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> SpinsimStatus {
    match err.exit_code() {
        2 => SpinsimStatus::InvalidArgument,
        _ => SpinsimStatus::NumericalError,
    }
}

fn guard<F: FnOnce() -> SpinsimStatus>(f: F) -> SpinsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&msg);
            SpinsimStatus::InternalError
        }
    }
}

/// Version string of the library, static storage.
#[no_mangle]
pub extern "C" fn spinsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Thread-local message describing the most recent error on this thread.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spinsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

macro_rules! nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_error(concat!("null pointer: ", stringify!($ptr)));
            return SpinsimStatus::NullPointer;
        }
    };
}

fn write_result(out: *mut f64, value: Result<f64, Error>) -> SpinsimStatus {
    match value {
        Ok(v) => {
            unsafe { *out = v };
            SpinsimStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Lamb-Dicke factor k_eff·√(ħ/(2mω)).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn spinsim_lamb_dicke_factor(
    k_eff: f64,
    mode_frequency: f64,
    ion_mass: f64,
    out: *mut f64,
) -> SpinsimStatus {
    nonnull!(out);
    guard(|| write_result(out, lamb_dicke_factor(k_eff, mode_frequency, ion_mass)))
}

/// Raman Rabi frequency |Ω1Ω2/(2Δ)|.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn spinsim_raman_rabi_frequency(
    omega1: f64,
    omega2: f64,
    delta: f64,
    out: *mut f64,
) -> SpinsimStatus {
    nonnull!(out);
    guard(|| write_result(out, raman_rabi_frequency(omega1, omega2, delta)))
}

/// Off-resonant excitation probability Ω²/(2Δ²).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn spinsim_scattering_probability(
    omega: f64,
    delta: f64,
    out: *mut f64,
) -> SpinsimStatus {
    nonnull!(out);
    guard(|| write_result(out, scattering_probability(omega, delta)))
}

/// AC-Stark shift Ω²/(4Δ).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn spinsim_ac_stark_shift(
    omega: f64,
    delta: f64,
    out: *mut f64,
) -> SpinsimStatus {
    nonnull!(out);
    guard(|| write_result(out, ac_stark_shift(omega, delta)))
}

/// Sideband matrix element ratio Ω_{n,m}/Ω0 (signed).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn spinsim_sideband_matrix_element(
    n: u32,
    m: u32,
    eta: f64,
    out: *mut f64,
) -> SpinsimStatus {
    nonnull!(out);
    guard(|| {
        if eta < 0.0 {
            set_error("eta must be non-negative");
            return SpinsimStatus::InvalidArgument;
        }
        unsafe { *out = sideband_matrix_element(n as usize, m as usize, eta) };
        SpinsimStatus::Ok
    })
}

/// Two-level transfer probability Ω²/(Ω²+δ²)·sin²(√(Ω²+δ²)t/2).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn spinsim_generalized_rabi_transfer(
    omega: f64,
    detuning: f64,
    t: f64,
    out: *mut f64,
) -> SpinsimStatus {
    nonnull!(out);
    guard(|| {
        if t < 0.0 {
            set_error("time must be non-negative");
            return SpinsimStatus::InvalidArgument;
        }
        unsafe { *out = generalized_rabi_transfer(omega, detuning, t) };
        SpinsimStatus::Ok
    })
}

/// Opaque phonon number distribution.
pub struct SpinsimDistribution(PhononDistribution);

/// Thermal distribution P_n = n̄ⁿ/(n̄+1)ⁿ⁺¹ truncated at `cutoff`.
///
/// # Safety
/// `out` must point to a writable handle slot; free with
/// `spinsim_distribution_free`.
#[no_mangle]
pub unsafe extern "C" fn spinsim_thermal_distribution(
    nbar: f64,
    cutoff: u32,
    out: *mut *mut SpinsimDistribution,
) -> SpinsimStatus {
    nonnull!(out);
    guard(|| match thermal_distribution(nbar, cutoff as usize) {
        Ok(d) => {
            unsafe { *out = Box::into_raw(Box::new(SpinsimDistribution(d))) };
            SpinsimStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    })
}

/// Build a distribution from `len` non-negative weights (renormalized).
///
/// # Safety
/// `weights` must point to `len` readable doubles; `out` to a writable slot.
#[no_mangle]
pub unsafe extern "C" fn spinsim_distribution_from_weights(
    weights: *const f64,
    len: usize,
    out: *mut *mut SpinsimDistribution,
) -> SpinsimStatus {
    nonnull!(weights);
    nonnull!(out);
    let data = unsafe { slice::from_raw_parts(weights, len) }.to_vec();
    guard(|| match PhononDistribution::from_weights(data) {
        Ok(d) => {
            unsafe { *out = Box::into_raw(Box::new(SpinsimDistribution(d))) };
            SpinsimStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    })
}

/// Number of Fock levels (cutoff + 1) carried by the distribution.
///
/// # Safety
/// `dist` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn spinsim_distribution_len(dist: *const SpinsimDistribution) -> usize {
    if dist.is_null() {
        return 0;
    }
    unsafe { &*dist }.0.probabilities().len()
}

/// Copy the probabilities into `buf` (must hold `len` doubles as reported by
/// `spinsim_distribution_len`).
///
/// # Safety
/// `dist` must be live; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn spinsim_distribution_copy(
    dist: *const SpinsimDistribution,
    buf: *mut f64,
    len: usize,
) -> SpinsimStatus {
    nonnull!(dist);
    nonnull!(buf);
    let probs = unsafe { &*dist }.0.probabilities();
    if len != probs.len() {
        set_error("buffer length does not match the distribution length");
        return SpinsimStatus::InvalidArgument;
    }
    unsafe { slice::from_raw_parts_mut(buf, len) }.copy_from_slice(probs);
    SpinsimStatus::Ok
}

/// Mean phonon number Σ n·P_n.
///
/// # Safety
/// `dist` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_distribution_mean(dist: *const SpinsimDistribution) -> f64 {
    if dist.is_null() {
        return f64::NAN;
    }
    unsafe { &*dist }.0.mean()
}

/// Evolve the distribution under the constant-rate heating master equation
/// for time `t` (seconds), in place.
///
/// # Safety
/// `dist` must be a live, exclusively held handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_apply_heating(
    dist: *mut SpinsimDistribution,
    rate_per_s: f64,
    t: f64,
) -> SpinsimStatus {
    nonnull!(dist);
    guard(|| {
        let handle = unsafe { &mut *dist };
        match apply_heating(&handle.0, &HeatingModel { rate: rate_per_s }, t) {
            Ok(d) => {
                handle.0 = d;
                SpinsimStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a distribution handle.
///
/// # Safety
/// `dist` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spinsim_distribution_free(dist: *mut SpinsimDistribution) {
    if !dist.is_null() {
        drop(unsafe { Box::from_raw(dist) });
    }
}

/// Transition selector for `spinsim_flop_signal`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SpinsimTransition {
    Carrier = 0,
    RedSideband = 1,
    BlueSideband = 2,
}

/// Damped sideband-flopping signal P↓(t) for `len` time samples.
///
/// # Safety
/// `dist` must be live; `times` must hold `len` readable doubles and `out`
/// `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn spinsim_flop_signal(
    dist: *const SpinsimDistribution,
    base_rabi_frequency: f64,
    lamb_dicke: f64,
    transition: SpinsimTransition,
    decay_rate: f64,
    contrast: f64,
    times: *const f64,
    len: usize,
    out: *mut f64,
) -> SpinsimStatus {
    nonnull!(dist);
    nonnull!(times);
    nonnull!(out);
    guard(|| {
        let kind = match transition {
            SpinsimTransition::Carrier => TransitionKind::Carrier,
            SpinsimTransition::RedSideband => TransitionKind::RedSideband,
            SpinsimTransition::BlueSideband => TransitionKind::BlueSideband,
        };
        let spec = TransitionSpec {
            base_rabi_frequency,
            lamb_dicke,
            kind,
            detuning: 0.0,
        };
        if let Err(e) = spec.validate() {
            set_error(&e.to_string());
            return status_of(&e);
        }
        let deco = DecoherenceModel { decay_rate, contrast };
        if let Err(e) = deco.validate() {
            set_error(&e.to_string());
            return status_of(&e);
        }
        let t = unsafe { slice::from_raw_parts(times, len) };
        let signal = flop_signal(&unsafe { &*dist }.0, &spec, &deco, t);
        unsafe { slice::from_raw_parts_mut(out, len) }.copy_from_slice(&signal);
        SpinsimStatus::Ok
    })
}

/// Opaque reconstruction result.
pub struct SpinsimReconstruction(ReconstructionResult);

/// Reconstruct {P_n, A, γ} from a uniformly sampled trace.
///
/// `times_s`/`p_down` hold `len` samples; `shots` is the per-point shot count
/// (used by the bootstrap); the dictionary holds levels 0..=n_max.
///
/// # Safety
/// Array arguments must match `len`; `out` must be a writable handle slot.
/// Free with `spinsim_reconstruction_free`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn spinsim_reconstruct(
    times_s: *const f64,
    p_down: *const f64,
    len: usize,
    shots: u32,
    omega0: f64,
    eta: f64,
    n_max: u32,
    init_contrast: f64,
    init_decay_rate: f64,
    bootstrap_resamples: u32,
    seed: u64,
    out: *mut *mut SpinsimReconstruction,
) -> SpinsimStatus {
    nonnull!(times_s);
    nonnull!(p_down);
    nonnull!(out);
    let times = unsafe { slice::from_raw_parts(times_s, len) }.to_vec();
    let probs = unsafe { slice::from_raw_parts(p_down, len) }.to_vec();
    guard(|| {
        let run = || -> Result<ReconstructionResult, Error> {
            let trace = RabiTrace::new(times, probs, shots.max(1))?;
            let lines = predict_line_positions(omega0, eta, n_max as usize);
            let opts = DeconvolveOptions {
                bootstrap_resamples: bootstrap_resamples as usize,
                seed,
                ..DeconvolveOptions::default()
            };
            deconvolve(&trace, &lines, init_contrast, init_decay_rate, &opts)
        };
        match run() {
            Ok(rec) => {
                unsafe { *out = Box::into_raw(Box::new(SpinsimReconstruction(rec))) };
                SpinsimStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Number of reconstructed levels.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_reconstruction_len(rec: *const SpinsimReconstruction) -> usize {
    if rec.is_null() {
        return 0;
    }
    unsafe { &*rec }.0.distribution.probabilities().len()
}

/// Copy the reconstructed probabilities into `buf`.
///
/// # Safety
/// `rec` must be live; `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn spinsim_reconstruction_probabilities(
    rec: *const SpinsimReconstruction,
    buf: *mut f64,
    len: usize,
) -> SpinsimStatus {
    nonnull!(rec);
    nonnull!(buf);
    let probs = unsafe { &*rec }.0.distribution.probabilities();
    if len != probs.len() {
        set_error("buffer length does not match the reconstruction length");
        return SpinsimStatus::InvalidArgument;
    }
    unsafe { slice::from_raw_parts_mut(buf, len) }.copy_from_slice(probs);
    SpinsimStatus::Ok
}

/// Scalar accessors of a reconstruction.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_reconstruction_nbar(rec: *const SpinsimReconstruction) -> f64 {
    if rec.is_null() {
        return f64::NAN;
    }
    unsafe { &*rec }.0.mean_phonon
}

/// Fitted readout contrast A.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_reconstruction_contrast(
    rec: *const SpinsimReconstruction,
) -> f64 {
    if rec.is_null() {
        return f64::NAN;
    }
    unsafe { &*rec }.0.contrast
}

/// Fitted coherence decay rate γ (1/s).
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_reconstruction_decay_rate(
    rec: *const SpinsimReconstruction,
) -> f64 {
    if rec.is_null() {
        return f64::NAN;
    }
    unsafe { &*rec }.0.decay_rate
}

/// Residual 2-norm of the fit.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_reconstruction_residual(
    rec: *const SpinsimReconstruction,
) -> f64 {
    if rec.is_null() {
        return f64::NAN;
    }
    unsafe { &*rec }.0.residual_norm
}

/// Release a reconstruction handle.
///
/// # Safety
/// `rec` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spinsim_reconstruction_free(rec: *mut SpinsimReconstruction) {
    if !rec.is_null() {
        drop(unsafe { Box::from_raw(rec) });
    }
}

/// Opaque simulated dataset.
pub struct SpinsimDataset(RunDataset);

/// Run the full experimental sequence from a TOML config string.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` a writable handle
/// slot. Free with `spinsim_dataset_free`.
#[no_mangle]
pub unsafe extern "C" fn spinsim_sequence_run(
    config_toml: *const c_char,
    out: *mut *mut SpinsimDataset,
) -> SpinsimStatus {
    nonnull!(config_toml);
    nonnull!(out);
    let raw = match unsafe { CStr::from_ptr(config_toml) }.to_str() {
        Ok(s) => s.to_owned(),
        Err(_) => {
            set_error("config string is not valid UTF-8");
            return SpinsimStatus::Utf8Error;
        }
    };
    guard(|| {
        let run = || -> Result<RunDataset, Error> {
            let config = SequenceConfig::from_toml(&raw)?;
            run_sequence(&config.to_plan(None)?)
        };
        match run() {
            Ok(ds) => {
                unsafe { *out = Box::into_raw(Box::new(SpinsimDataset(ds))) };
                SpinsimStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Number of traces in the dataset.
///
/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_dataset_trace_count(ds: *const SpinsimDataset) -> usize {
    if ds.is_null() {
        return 0;
    }
    unsafe { &*ds }.0.traces.len()
}

/// Number of scan points in trace `trace_idx`.
///
/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spinsim_dataset_trace_len(
    ds: *const SpinsimDataset,
    trace_idx: usize,
) -> usize {
    if ds.is_null() {
        return 0;
    }
    unsafe { &*ds }.0.traces.get(trace_idx).map(|t| t.axis.len()).unwrap_or(0)
}

/// Copy one trace into caller buffers (each holding `len` elements as
/// reported by `spinsim_dataset_trace_len`). Any output pointer may be NULL
/// to skip that column.
///
/// # Safety
/// Non-NULL buffers must hold `len` writable elements of the right type.
#[no_mangle]
pub unsafe extern "C" fn spinsim_dataset_trace_copy(
    ds: *const SpinsimDataset,
    trace_idx: usize,
    axis: *mut f64,
    p_down: *mut f64,
    shots: *mut u32,
    successes: *mut u32,
    len: usize,
) -> SpinsimStatus {
    nonnull!(ds);
    let Some(trace) = unsafe { &*ds }.0.traces.get(trace_idx) else {
        set_error("trace index out of range");
        return SpinsimStatus::InvalidArgument;
    };
    if len != trace.axis.len() {
        set_error("buffer length does not match the trace length");
        return SpinsimStatus::InvalidArgument;
    }
    if !axis.is_null() {
        unsafe { slice::from_raw_parts_mut(axis, len) }.copy_from_slice(&trace.axis);
    }
    if !p_down.is_null() {
        let estimates: Vec<f64> = trace.points.iter().map(|p| p.estimate()).collect();
        unsafe { slice::from_raw_parts_mut(p_down, len) }.copy_from_slice(&estimates);
    }
    if !shots.is_null() {
        let col: Vec<u32> = trace.points.iter().map(|p| p.shots).collect();
        unsafe { slice::from_raw_parts_mut(shots, len) }.copy_from_slice(&col);
    }
    if !successes.is_null() {
        let col: Vec<u32> = trace.points.iter().map(|p| p.successes).collect();
        unsafe { slice::from_raw_parts_mut(successes, len) }.copy_from_slice(&col);
    }
    SpinsimStatus::Ok
}

/// Release a dataset handle.
///
/// # Safety
/// `ds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spinsim_dataset_free(ds: *mut SpinsimDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Weighted linear heating fit through `len` (delay_s, nbar, sigma) points.
/// `sigmas` may be NULL for an unweighted fit.
///
/// # Safety
/// `delays_s`/`nbars` (and `sigmas` when non-NULL) must hold `len` readable
/// doubles; the out pointers may be NULL to skip.
#[no_mangle]
pub unsafe extern "C" fn spinsim_heating_rate_fit(
    delays_s: *const f64,
    nbars: *const f64,
    sigmas: *const f64,
    len: usize,
    rate_out: *mut f64,
    rate_stderr_out: *mut f64,
    intercept_out: *mut f64,
) -> SpinsimStatus {
    nonnull!(delays_s);
    nonnull!(nbars);
    let delays = unsafe { slice::from_raw_parts(delays_s, len) };
    let nbars = unsafe { slice::from_raw_parts(nbars, len) };
    let sigmas: Vec<f64> = if sigmas.is_null() {
        vec![0.0; len]
    } else {
        unsafe { slice::from_raw_parts(sigmas, len) }.to_vec()
    };
    guard(|| {
        let points: Vec<(f64, f64, f64)> = delays
            .iter()
            .zip(nbars)
            .zip(&sigmas)
            .map(|((&d, &n), &s)| (d, n, s))
            .collect();
        match heating_rate_fit(&points) {
            Ok(fit) => {
                if !rate_out.is_null() {
                    unsafe { *rate_out = fit.rate };
                }
                if !rate_stderr_out.is_null() {
                    unsafe { *rate_stderr_out = fit.rate_stderr };
                }
                if !intercept_out.is_null() {
                    unsafe { *intercept_out = fit.intercept };
                }
                SpinsimStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}
