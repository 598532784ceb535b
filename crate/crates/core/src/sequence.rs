//! Stochastic experiment engine: Doppler cooling, pulsed sideband cooling
//! with quench and repump, optical pumping, heating, shelving readout with
//! Poisson photon statistics, and projection-noise sampling over repeated
//! cycles.
//!
//! Everything is driven by counter-based RNG streams derived from
//! (seed, trace index, point index), so datasets are bit-identical across
//! reruns and across any degree of parallelism.

use rand::Rng;
use rayon::prelude::*;

use crate::dynamics::{
    flop_signal, readout_transfer_curve, DecoherenceModel, ReadoutPulseParams, ReadoutScheme,
};
use crate::error::{Error, Result};
use crate::physics::{
    generalized_rabi_transfer, thermal_distribution, PhononDistribution, TransitionKind,
    TransitionSpec, CUTOFF_OCCUPANCY_TOL,
};
use crate::rng::{derive_stream, poisson};

/// Constant trap-induced heating.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatingModel {
    /// Heating rate ṅ (phonons/s).
    pub rate: f64,
}

impl HeatingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0) {
            return Err(Error::Domain("heating rate must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for HeatingModel {
    /// 0.3 phonons/ms.
    fn default() -> Self {
        HeatingModel { rate: 300.0 }
    }
}

/// How the accumulated wrong-spin population is returned during cooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepumpStyle {
    /// Circularly polarized 397 nm pulse; fast but polarization-limited.
    Sigma397,
    /// Quadrupole pumping via 729 nm + quench; slower, used every
    /// `cycles_per_repump` cycles so the overhead is negligible.
    Pump729,
}

impl RepumpStyle {
    /// Wall-clock duration of one repump interruption (s).
    pub fn duration(&self) -> f64 {
        match self {
            RepumpStyle::Sigma397 => 3e-6,
            RepumpStyle::Pump729 => 36e-6,
        }
    }
}

/// One pulsed-cooling stage.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingStage {
    /// Red-sideband pulse duration (s).
    pub rsb_pulse_duration: f64,
    /// Quench pulse duration (s).
    pub quench_duration: f64,
    /// Number of RSB+quench cycles in this stage.
    pub cycles: u32,
}

/// Pulsed sideband-cooling schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingSchedule {
    pub stages: Vec<CoolingStage>,
    /// Cooling cycles between repump interruptions.
    pub cycles_per_repump: u32,
    pub repump_style: RepumpStyle,
    /// Per-cycle probability of decaying into the wrong spin ground state;
    /// the default makes ten cycles accumulate ~10% leakage.
    pub wrong_spin_branching: f64,
    /// Model off-resonant carrier excitation followed by spontaneous decay
    /// as a one-phonon gain per RSB pulse.
    pub carrier_reheating: bool,
}

impl CoolingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Domain("cooling schedule needs at least one stage".into()));
        }
        for s in &self.stages {
            if !(s.rsb_pulse_duration > 0.0) || !(s.quench_duration > 0.0) {
                return Err(Error::Domain("cooling pulse durations must be positive".into()));
            }
            if s.cycles == 0 {
                return Err(Error::Domain("cooling cycle counts must be positive".into()));
            }
        }
        if self.cycles_per_repump == 0 {
            return Err(Error::Domain("cycles per repump must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.wrong_spin_branching) {
            return Err(Error::Domain("wrong-spin branching must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

impl Default for CoolingSchedule {
    /// Two stages: a fast stage for the hot distribution, then longer pulses
    /// matched to the n = 1 → 0 bottleneck, with 729-style repumping.
    fn default() -> Self {
        CoolingSchedule {
            stages: vec![
                CoolingStage { rsb_pulse_duration: 6e-6, quench_duration: 2e-6, cycles: 80 },
                CoolingStage { rsb_pulse_duration: 11e-6, quench_duration: 2e-6, cycles: 60 },
            ],
            cycles_per_repump: 10,
            repump_style: RepumpStyle::Pump729,
            wrong_spin_branching: 1.0 - 0.9f64.powf(0.1),
            carrier_reheating: true,
        }
    }
}

/// Per-stage cooling diagnostics.
#[derive(Debug, Clone)]
pub struct CoolingDiagnostics {
    /// Peak wrong-spin population seen just before a repump, per stage.
    pub wrong_spin_peak_per_stage: Vec<f64>,
    /// Mean phonon number after cooling.
    pub final_mean: f64,
    /// Total wall-clock time spent cooling (s).
    pub wall_time: f64,
}

/// Doppler cooling end point: a thermal distribution at the configured mean
/// occupation (the spin is repumped into the ground manifold afterwards).
pub fn doppler_cool(target_nbar: f64, cutoff: usize) -> Result<PhononDistribution> {
    thermal_distribution(target_nbar, cutoff)
}

/// Infinite-temperature birth-death heating master equation
///
///   Ṗ_n = ṅ [ n P_{n−1} + (n+1) P_{n+1} − (2n+1) P_n ],
///
/// integrated over `t` with the upward channel closed at the cutoff. Errors
/// out when the evolved top-state occupancy exceeds 1e-6.
pub fn apply_heating(
    dist: &PhononDistribution,
    heating: &HeatingModel,
    t: f64,
) -> Result<PhononDistribution> {
    heating.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Domain("heating duration must be non-negative".into()));
    }
    if t == 0.0 || heating.rate == 0.0 {
        return Ok(dist.clone());
    }
    let n_top = dist.cutoff();
    let rate = heating.rate;
    // RK4 with the step bounded well inside the stability region of the
    // stiffest (top-of-ladder) rate.
    let h_max = 0.5 / (rate * (2.0 * n_top as f64 + 1.0));
    let steps = (t / h_max).ceil().max(1.0) as usize;
    let h = t / steps as f64;

    let deriv = |p: &[f64], d: &mut [f64]| {
        for n in 0..=n_top {
            let inflow_below = if n > 0 { n as f64 * p[n - 1] } else { 0.0 };
            let inflow_above = if n < n_top { (n + 1) as f64 * p[n + 1] } else { 0.0 };
            let outflow = if n < n_top {
                (2 * n + 1) as f64 * p[n]
            } else {
                // top state: upward channel closed by the truncation
                n as f64 * p[n]
            };
            d[n] = rate * (inflow_below + inflow_above - outflow);
        }
    };

    let dim = n_top + 1;
    let mut p = dist.probabilities().to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];
    for _ in 0..steps {
        deriv(&p, &mut k1);
        for i in 0..dim {
            tmp[i] = p[i] + 0.5 * h * k1[i];
        }
        deriv(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = p[i] + 0.5 * h * k2[i];
        }
        deriv(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = p[i] + h * k3[i];
        }
        deriv(&tmp, &mut k4);
        for i in 0..dim {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if p[i] < 0.0 {
                // integrator wiggle at the wavefront, far below resolution
                p[i] = 0.0;
            }
        }
    }

    if p[n_top] > CUTOFF_OCCUPANCY_TOL {
        return Err(Error::Integration(format!(
            "heating overflowed the Fock cutoff {n_top} (top-state occupancy {:.3e}); \
             rerun with a larger cutoff",
            p[n_top]
        )));
    }
    PhononDistribution::from_weights(p)
}

/// Pulsed resolved-sideband cooling on phonon distributions.
///
/// Each cycle drives the red sideband for the stage's pulse time (the quench
/// makes the transfer incoherent), optionally adds one phonon with the
/// off-resonant carrier scattering probability, applies trap heating for the
/// cycle wall time, and leaks population into the wrong spin state until the
/// periodic repump returns it.
pub fn sideband_cool(
    initial: &PhononDistribution,
    schedule: &CoolingSchedule,
    heating: &HeatingModel,
    transition: &TransitionSpec,
) -> Result<(PhononDistribution, CoolingDiagnostics)> {
    schedule.validate()?;
    heating.validate()?;
    transition.validate()?;
    if transition.kind != TransitionKind::RedSideband {
        return Err(Error::Domain("sideband cooling drives the red sideband".into()));
    }

    let cutoff = initial.cutoff();
    let axial = crate::physics::TrapConfig::default().axial_frequency;
    // per-n transfer and reheat probabilities are stage-independent except
    // for the pulse time, so precompute the couplings once
    let rsb_rabi: Vec<f64> = (0..=cutoff).map(|n| transition.rabi_frequency(n)).collect();
    let carrier = TransitionSpec { kind: TransitionKind::Carrier, ..transition.clone() };
    let reheat: Vec<f64> = (0..=cutoff)
        .map(|n| {
            if schedule.carrier_reheating {
                crate::physics::scattering_probability(carrier.rabi_frequency(n), axial)
                    .unwrap_or(0.0)
                    .min(1.0)
            } else {
                0.0
            }
        })
        .collect();

    let mut active = initial.probabilities().to_vec();
    let mut wrong = vec![0.0; cutoff + 1];
    let mut wall_time = 0.0;
    let mut peaks = Vec::with_capacity(schedule.stages.len());

    for stage in &schedule.stages {
        let mut stage_peak = 0.0f64;
        let transfer: Vec<f64> = rsb_rabi
            .iter()
            .map(|w| (0.5 * w * stage.rsb_pulse_duration).sin().powi(2))
            .collect();
        for cycle in 0..stage.cycles {
            // incoherent RSB step: n -> n-1 with the pulse transfer probability
            let mut next = vec![0.0; cutoff + 1];
            for n in 0..=cutoff {
                let moved = active[n] * transfer[n];
                next[n] += active[n] - moved;
                if n > 0 {
                    next[n - 1] += moved;
                }
            }
            // carrier scattering puts one phonon back in
            let mut after = vec![0.0; cutoff + 1];
            for n in 0..=cutoff {
                let up = next[n] * reheat[n];
                after[n] += next[n] - up;
                if n < cutoff {
                    after[n + 1] += up;
                } else {
                    after[n] += up;
                }
            }
            active = after;

            // spin leakage during the quench
            let leak = schedule.wrong_spin_branching;
            if leak > 0.0 {
                for n in 0..=cutoff {
                    let lost = active[n] * leak;
                    active[n] -= lost;
                    wrong[n] += lost;
                }
            }

            // trap heating over the cycle wall time, acting on both spins
            let cycle_time = stage.rsb_pulse_duration + stage.quench_duration;
            wall_time += cycle_time;
            let mut combined: Vec<f64> = active.iter().zip(&wrong).map(|(a, w)| a + w).collect();
            let active_sum: f64 = active.iter().sum();
            let total: f64 = combined.iter().sum();
            let heated = apply_heating(
                &PhononDistribution::from_weights(combined.clone())?,
                heating,
                cycle_time,
            )?;
            // heating acts identically on both spin populations; redistribute
            // by the pre-heating active fraction
            let frac = if total > 0.0 { active_sum / total } else { 1.0 };
            for n in 0..=cutoff {
                combined[n] = heated.probabilities()[n] * total;
                active[n] = combined[n] * frac;
                wrong[n] = combined[n] * (1.0 - frac);
            }

            if (cycle + 1) % schedule.cycles_per_repump == 0 {
                let wrong_total: f64 = wrong.iter().sum();
                stage_peak = stage_peak.max(wrong_total);
                for n in 0..=cutoff {
                    active[n] += wrong[n];
                    wrong[n] = 0.0;
                }
                wall_time += schedule.repump_style.duration();
            }
        }
        // stage boundary: repump whatever is left
        let wrong_total: f64 = wrong.iter().sum();
        stage_peak = stage_peak.max(wrong_total);
        if wrong_total > 0.0 {
            for n in 0..=cutoff {
                active[n] += wrong[n];
                wrong[n] = 0.0;
            }
            wall_time += schedule.repump_style.duration();
        }
        peaks.push(stage_peak);
    }

    let dist = PhononDistribution::from_weights(active)?;
    let diagnostics = CoolingDiagnostics {
        wrong_spin_peak_per_stage: peaks,
        final_mean: dist.mean(),
        wall_time,
    };
    Ok((dist, diagnostics))
}

/// Optical pumping scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpScheme {
    Pulsed,
    Cw,
}

/// State-preparation parameters (729 nm pump + 854 nm quench).
#[derive(Debug, Clone, PartialEq)]
pub struct PumpConfig {
    pub scheme: PumpScheme,
    /// Number of pump/quench cycles (pulsed scheme).
    pub n_pulses: u32,
    /// 729 nm pulse duration (s).
    pub pulse_729_duration: f64,
    /// Quench pulse duration (s); also sets the measurement rate that
    /// suppresses coherent buildup in the cw scheme.
    pub quench_duration: f64,
    /// Zeeman splitting to the parasitic line (rad/s).
    pub parasitic_splitting: f64,
    /// Resonant Rabi frequency of the pump transition (rad/s).
    pub pump_rabi_frequency: f64,
    /// Fraction of quenched pump-line population landing in the target spin
    /// state (selection rules make this essentially 1).
    pub target_branch_up: f64,
    /// Fraction of parasitically excited population returned to the wrong
    /// spin state by the quench.
    pub parasitic_return_down: f64,
    /// Suppression of the coherent transfer rate by the continuous quench
    /// measurement (cw scheme only); phenomenological.
    pub cw_suppression: f64,
    /// Residual spin randomization rate of the cw scheme relative to its
    /// pump rate; sets the cw saturation floor. Phenomenological.
    pub cw_depolarization: f64,
}

impl PumpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_729_duration > 0.0) || !(self.quench_duration > 0.0) {
            return Err(Error::Domain("pump pulse durations must be positive".into()));
        }
        if !(self.pump_rabi_frequency >= 0.0) {
            return Err(Error::Domain("pump Rabi frequency must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.target_branch_up)
            || !(0.0..=1.0).contains(&self.parasitic_return_down)
        {
            return Err(Error::Domain("pump branching fractions must lie in [0, 1]".into()));
        }
        if !(self.cw_suppression > 0.0 && self.cw_suppression <= 1.0) {
            return Err(Error::Domain("cw suppression must lie in (0, 1]".into()));
        }
        if !(self.cw_depolarization >= 0.0) {
            return Err(Error::Domain("cw depolarization must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for PumpConfig {
    /// 10 µs π pulses (Ω = 2π·50 kHz), 2 µs quench, 8 MHz parasitic
    /// splitting, three cycles.
    fn default() -> Self {
        use std::f64::consts::TAU;
        PumpConfig {
            scheme: PumpScheme::Pulsed,
            n_pulses: 3,
            pulse_729_duration: 10e-6,
            quench_duration: 2e-6,
            parasitic_splitting: TAU * 8e6,
            pump_rabi_frequency: TAU * 50e3,
            target_branch_up: 1.0,
            parasitic_return_down: 0.5,
            cw_suppression: 0.3,
            cw_depolarization: 0.03,
        }
    }
}

/// Pumping result: final fidelity plus the fidelity-versus-duration curve.
#[derive(Debug, Clone)]
pub struct PumpOutcome {
    /// Population in the target state after the configured sequence.
    pub fidelity: f64,
    /// (pulse duration, fidelity) samples; for the cw scheme the axis is the
    /// total pump time.
    pub curve: Vec<(f64, f64)>,
}

fn pulsed_pump_fidelity(config: &PumpConfig, pulse_duration: f64, initial_up: f64) -> f64 {
    let mut up = initial_up;
    let mut down = 1.0 - initial_up;
    for _ in 0..config.n_pulses {
        let pumped =
            down * generalized_rabi_transfer(config.pump_rabi_frequency, 0.0, pulse_duration);
        let parasitic = up
            * generalized_rabi_transfer(
                config.pump_rabi_frequency,
                config.parasitic_splitting,
                pulse_duration,
            );
        down += -pumped * config.target_branch_up + parasitic * config.parasitic_return_down;
        up += pumped * config.target_branch_up - parasitic * config.parasitic_return_down;
    }
    up
}

fn cw_pump_fidelity(config: &PumpConfig, total_time: f64, initial_up: f64) -> f64 {
    // overdamped rate picture: the quench projects the slow coherent drive,
    // leaving an effective pump rate s·Ω²·τ_q toward the target and a
    // Lorentzian-suppressed parasitic rate plus a depolarization floor
    let omega = config.pump_rabi_frequency;
    let gamma_q = 1.0 / config.quench_duration;
    let r_pump = config.cw_suppression * omega * omega / gamma_q;
    let lorentz = gamma_q * gamma_q
        / (gamma_q * gamma_q + 4.0 * config.parasitic_splitting * config.parasitic_splitting);
    let r_parasitic = r_pump * lorentz;
    let r_depol = config.cw_depolarization * r_pump;

    let loss = config.parasitic_return_down * r_parasitic + 0.5 * r_depol;
    let gain = r_pump + 0.5 * r_depol;
    let down0 = 1.0 - initial_up;
    let down_inf = loss / (gain + loss);
    let down = down_inf + (down0 - down_inf) * (-(gain + loss) * total_time).exp();
    1.0 - down
}

/// Pump the spin into the target state, returning the final fidelity and a
/// robustness curve versus pulse duration (pulsed) or total time (cw).
pub fn optical_pump(config: &PumpConfig, initial_up: f64) -> Result<PumpOutcome> {
    config.validate()?;
    if !(0.0..=1.0).contains(&initial_up) {
        return Err(Error::Domain("initial population must lie in [0, 1]".into()));
    }
    match config.scheme {
        PumpScheme::Pulsed => {
            let fidelity = pulsed_pump_fidelity(config, config.pulse_729_duration, initial_up);
            let t_max = 2.5 * config.pulse_729_duration;
            let curve = (0..=100)
                .map(|k| {
                    let t = t_max * k as f64 / 100.0;
                    (t, pulsed_pump_fidelity(config, t, initial_up))
                })
                .collect();
            Ok(PumpOutcome { fidelity, curve })
        }
        PumpScheme::Cw => {
            let total = config.n_pulses as f64
                * (config.pulse_729_duration + config.quench_duration);
            let fidelity = cw_pump_fidelity(config, total, initial_up);
            let curve = (0..=100)
                .map(|k| {
                    let t = 2.5 * total * k as f64 / 100.0;
                    (t, cw_pump_fidelity(config, t, initial_up))
                })
                .collect();
            Ok(PumpOutcome { fidelity, curve })
        }
    }
}

/// Fluorescence detection model: Poisson photon counts against a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    /// Mean counts per window for an unshelved (bright) ion.
    pub bright_mean: f64,
    /// Mean background counts for a shelved (dark) ion.
    pub dark_mean: f64,
    /// Detection window (s); informational.
    pub window: f64,
    /// Classification threshold; `None` resolves to the integer minimizing
    /// total Poisson misclassification.
    pub threshold: Option<u32>,
    /// Probability that an ↑ ion is successfully shelved before detection.
    pub shelving_efficiency: f64,
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.bright_mean > self.dark_mean && self.dark_mean >= 0.0) {
            return Err(Error::Domain(
                "readout means must satisfy bright > dark >= 0".into(),
            ));
        }
        if let Some(t) = self.threshold {
            if (t as f64) <= self.dark_mean || (t as f64) >= self.bright_mean {
                return Err(Error::Domain(format!(
                    "threshold {t} must lie between the dark and bright means"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.shelving_efficiency) {
            return Err(Error::Domain("shelving efficiency must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn resolved_threshold(&self) -> u32 {
        self.threshold
            .unwrap_or_else(|| optimal_threshold(self.bright_mean, self.dark_mean))
    }

    /// (P[bright below threshold], P[dark at/above threshold]).
    pub fn misclassification(&self) -> (f64, f64) {
        let t = self.resolved_threshold();
        let miss_bright = if t == 0 { 0.0 } else { poisson_cdf(self.bright_mean, t as u64 - 1) };
        let miss_dark = 1.0 - if t == 0 { 0.0 } else { poisson_cdf(self.dark_mean, t as u64 - 1) };
        (miss_bright, miss_dark)
    }
}

impl Default for ReadoutModel {
    /// 50 signal + 5 background counts in 3 ms against 5 dark counts;
    /// threshold picked at startup; shelving at the double-RAP level.
    fn default() -> Self {
        ReadoutModel {
            bright_mean: 55.0,
            dark_mean: 5.0,
            window: 3e-3,
            threshold: None,
            shelving_efficiency: 0.9975,
        }
    }
}

/// Exact Poisson CDF P[X ≤ k] by pmf summation.
pub fn poisson_cdf(mean: f64, k: u64) -> f64 {
    let mut pmf = (-mean).exp();
    let mut acc = pmf;
    for j in 1..=k {
        pmf *= mean / j as f64;
        acc += pmf;
    }
    acc.min(1.0)
}

/// Integer threshold minimizing total Poisson misclassification.
pub fn optimal_threshold(bright_mean: f64, dark_mean: f64) -> u32 {
    assert!(bright_mean > dark_mean);
    let hi = bright_mean.ceil() as u32;
    let lo = dark_mean.floor() as u32 + 1;
    (lo..=hi)
        .min_by(|&a, &b| {
            let total = |t: u32| {
                poisson_cdf(bright_mean, t as u64 - 1) + 1.0 - poisson_cdf(dark_mean, t as u64 - 1)
            };
            total(a).total_cmp(&total(b))
        })
        .unwrap_or(lo)
}

/// One detected scan point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectedPoint {
    pub shots: u32,
    /// Shots classified spin-down (bright).
    pub successes: u32,
}

impl DetectedPoint {
    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.shots as f64
    }

    /// Binomial standard error of the estimate.
    pub fn binomial_error(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.shots as f64).sqrt()
    }
}

/// Simulate `shots` detection cycles at a given spin-down probability: ↑ is
/// shelved with the model efficiency, Poisson counts are drawn for the
/// resulting bright/dark state and thresholded into a binary outcome.
pub fn detect<R: Rng + ?Sized>(
    spin_down_probability: f64,
    shots: u32,
    model: &ReadoutModel,
    rng: &mut R,
) -> Result<DetectedPoint> {
    if shots == 0 {
        return Err(Error::Domain("detection needs at least one shot".into()));
    }
    if !(0.0..=1.0).contains(&spin_down_probability) {
        return Err(Error::Domain(format!(
            "spin-down probability {spin_down_probability} outside [0, 1]"
        )));
    }
    let threshold = model.resolved_threshold() as u64;
    let mut successes = 0;
    for _ in 0..shots {
        let down = rng.random::<f64>() < spin_down_probability;
        let shelved = !down && rng.random::<f64>() < model.shelving_efficiency;
        let mean = if shelved { model.dark_mean } else { model.bright_mean };
        let counts = poisson(rng, mean);
        if counts >= threshold {
            successes += 1;
        }
    }
    Ok(DetectedPoint { shots, successes })
}

/// What the scan axis sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxisKind {
    /// Probe pulse duration (s); the canonical Rabi-flopping scan.
    PulseDuration,
    /// Probe detuning (rad/s) at fixed pulse duration; the sideband spectrum.
    Detuning,
    /// Wait time before a fixed probe (s); heating scans.
    Delay,
}

/// Fully resolved scan description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub kind: ScanAxisKind,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub shots: u32,
    /// Wait times inserted before the probe; one output trace per entry
    /// (pulse-duration scans only).
    pub delays: Vec<f64>,
    /// Fixed probe duration for detuning and delay scans (s).
    pub probe_duration: f64,
}

impl ScanSpec {
    pub fn axis(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + step * k as f64).collect()
    }
}

/// Shelving wiring for the sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum ShelvingChoice {
    /// Fixed efficiency.
    Fixed(f64),
    /// Efficiency simulated from the readout pulse at line center, averaged
    /// over the prepared motional distribution.
    Simulated { scheme: ReadoutScheme, params: ReadoutPulseParams },
}

/// Resolved inputs of one experimental run.
#[derive(Debug, Clone)]
pub struct SequencePlan {
    /// Doppler-cooling end point n̄.
    pub doppler_nbar: f64,
    /// Fock-ladder truncation used throughout the run.
    pub fock_cutoff: usize,
    /// Pulsed sideband cooling; `None` skips straight to the probe.
    pub sideband_cooling: Option<(CoolingSchedule, TransitionSpec)>,
    pub pump: PumpConfig,
    /// Probe drive: base Rabi frequency, Lamb-Dicke factor and kind.
    pub probe: TransitionSpec,
    pub decoherence: DecoherenceModel,
    pub heating: HeatingModel,
    pub readout: ReadoutModel,
    pub shelving: ShelvingChoice,
    /// Axial mode frequency, the sideband offset of spectrum scans (rad/s).
    pub axial_frequency: f64,
    pub scan: ScanSpec,
    pub seed: u64,
}

/// One simulated trace: axis values, the noise-free probabilities and the
/// detected shot statistics.
#[derive(Debug, Clone)]
pub struct TraceResult {
    /// Delay (s) inserted before the probe for this trace.
    pub delay: f64,
    /// Scan axis values (s or rad/s depending on the scan kind).
    pub axis: Vec<f64>,
    /// Noise-free spin-down probabilities.
    pub ideal: Vec<f64>,
    pub points: Vec<DetectedPoint>,
}

/// Full dataset of one `run_sequence` invocation.
#[derive(Debug, Clone)]
pub struct RunDataset {
    pub traces: Vec<TraceResult>,
    pub seed: u64,
    /// Prepared (post-cooling) motional distribution.
    pub prepared: PhononDistribution,
    pub cooling_diagnostics: Option<CoolingDiagnostics>,
    /// State-preparation fidelity entering the signal mixing.
    pub init_fidelity: f64,
    /// Shelving efficiency used by detection.
    pub shelving_efficiency: f64,
}

fn mix_init(p_model: f64, init_fidelity: f64) -> f64 {
    init_fidelity * p_model + (1.0 - init_fidelity) * (1.0 - p_model)
}

/// Execute the canonical sequence: (a) Doppler cool, (b) sideband cool,
/// (c) initialize, (d) probe along the scan axis with optional heating
/// delays, (e) shelve, (f) detect. Deterministic for a fixed seed.
pub fn run_sequence(plan: &SequencePlan) -> Result<RunDataset> {
    plan.pump.validate()?;
    plan.probe.validate()?;
    plan.decoherence.validate()?;
    plan.readout.validate()?;

    // (a) + (b): motional preparation
    let doppler = doppler_cool(plan.doppler_nbar, plan.fock_cutoff)?;
    let (prepared, diagnostics) = match &plan.sideband_cooling {
        Some((schedule, transition)) => {
            let (d, diag) = sideband_cool(&doppler, schedule, &plan.heating, transition)?;
            (d, Some(diag))
        }
        None => (doppler, None),
    };

    // (c): spin initialization
    let init_fidelity = optical_pump(&plan.pump, 0.0)?.fidelity;

    // (e) wiring: shelving efficiency at the operating point
    let shelving_efficiency = match &plan.shelving {
        ShelvingChoice::Fixed(eff) => *eff,
        ShelvingChoice::Simulated { scheme, params } => {
            readout_transfer_curve(*scheme, &[0.0], &prepared, params)?[0]
        }
    };
    let readout = ReadoutModel {
        threshold: Some(plan.readout.resolved_threshold()),
        shelving_efficiency,
        ..plan.readout.clone()
    };

    let axis = plan.scan.axis();
    if axis.is_empty() {
        return Err(Error::Config("[scan] produced an empty axis".into()));
    }

    // (d): noise-free signal per trace
    let mut trace_plans: Vec<(f64, Vec<f64>)> = Vec::new();
    match plan.scan.kind {
        ScanAxisKind::PulseDuration => {
            let delays = if plan.scan.delays.is_empty() { vec![0.0] } else { plan.scan.delays.clone() };
            for &delay in &delays {
                let dist = apply_heating(&prepared, &plan.heating, delay)?;
                let ideal = flop_signal(&dist, &plan.probe, &plan.decoherence, &axis);
                trace_plans.push((delay, ideal));
            }
        }
        ScanAxisKind::Detuning => {
            let ideal = spectrum_signal(
                &prepared,
                &plan.probe,
                plan.axial_frequency,
                plan.scan.probe_duration,
                &axis,
            );
            trace_plans.push((0.0, ideal));
        }
        ScanAxisKind::Delay => {
            let mut ideal = Vec::with_capacity(axis.len());
            for &delay in &axis {
                let dist = apply_heating(&prepared, &plan.heating, delay)?;
                ideal.push(
                    flop_signal(&dist, &plan.probe, &plan.decoherence, &[plan.scan.probe_duration])[0],
                );
            }
            trace_plans.push((0.0, ideal));
        }
    }

    // (e)+(f): projection-noise sampling, one derived stream per point
    let traces = trace_plans
        .into_iter()
        .enumerate()
        .map(|(trace_idx, (delay, ideal))| {
            let points: Result<Vec<DetectedPoint>> = ideal
                .par_iter()
                .enumerate()
                .map(|(i, &p)| {
                    let mixed = mix_init(p, init_fidelity).clamp(0.0, 1.0);
                    let mut rng =
                        derive_stream(plan.seed, &[trace_idx as u64, i as u64]);
                    detect(mixed, plan.scan.shots, &readout, &mut rng)
                })
                .collect();
            Ok(TraceResult { delay, axis: axis.clone(), ideal, points: points? })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RunDataset {
        traces,
        seed: plan.seed,
        prepared,
        cooling_diagnostics: diagnostics,
        init_fidelity,
        shelving_efficiency,
    })
}

/// Excitation spectrum: spin-flip probability versus probe detuning for a
/// fixed pulse time, summing carrier and first axial sidebands weighted by
/// the phonon distribution.
fn spectrum_signal(
    dist: &PhononDistribution,
    probe: &TransitionSpec,
    axial_frequency: f64,
    probe_duration: f64,
    detunings: &[f64],
) -> Vec<f64> {
    let cutoff = dist.cutoff();
    let carrier = TransitionSpec { kind: TransitionKind::Carrier, ..probe.clone() };
    let rsb = TransitionSpec { kind: TransitionKind::RedSideband, ..probe.clone() };
    let bsb = TransitionSpec { kind: TransitionKind::BlueSideband, ..probe.clone() };
    let lines: Vec<(f64, Vec<f64>)> = vec![
        (0.0, (0..=cutoff).map(|n| carrier.rabi_frequency(n)).collect()),
        (-axial_frequency, (0..=cutoff).map(|n| rsb.rabi_frequency(n)).collect()),
        (axial_frequency, (0..=cutoff).map(|n| bsb.rabi_frequency(n)).collect()),
    ];
    detunings
        .iter()
        .map(|&delta| {
            let excited: f64 = dist
                .probabilities()
                .iter()
                .enumerate()
                .map(|(n, p)| {
                    let e: f64 = lines
                        .iter()
                        .map(|(center, rabi)| {
                            generalized_rabi_transfer(rabi[n], delta - center, probe_duration)
                        })
                        .sum();
                    p * e.min(1.0)
                })
                .sum();
            1.0 - excited.clamp(0.0, 1.0)
        })
        .collect()
}
