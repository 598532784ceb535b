//! Coherent dynamics: the damped sideband-flopping signal model, shaped-pulse
//! two-level integration for π-pulse and rapid-adiabatic-passage readout, and
//! Ramsey scans for AC-Stark shift extraction.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::physics::{
    ac_stark_shift, sideband_matrix_element, LaserBeamSpec, PhononDistribution, TransitionSpec,
};

/// Relative transfer-probability tolerance the adaptive integrator refines to.
pub const INTEGRATOR_TOL: f64 = 1e-6;

/// Readout contrast and coherence decay entering the flopping signal.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceModel {
    /// Coherence decay rate γ (1/s).
    pub decay_rate: f64,
    /// Readout contrast A ∈ (0, 1].
    pub contrast: f64,
}

impl DecoherenceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay_rate >= 0.0) {
            return Err(Error::Domain("decay rate must be non-negative".into()));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(Error::Domain("readout contrast must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

impl Default for DecoherenceModel {
    /// 280 µs coherence time, 96% contrast.
    fn default() -> Self {
        DecoherenceModel { decay_rate: 1.0 / 280e-6, contrast: 0.96 }
    }
}

/// Spin-down population versus pulse duration,
///
///   P↓(t) = Σ_n P_n/2 · (A cos(Ω_n t) e^{−γt} + 1),
///
/// with Ω_n the n-resolved Rabi frequency of the driven transition (carrier
/// Ω_{n,n}, blue sideband Ω_{n,n+1}, red sideband Ω_{n,n−1}). The drive is
/// taken resonant; `transition.detuning` only matters to spectrum scans.
pub fn flop_signal(
    dist: &PhononDistribution,
    transition: &TransitionSpec,
    decoherence: &DecoherenceModel,
    times: &[f64],
) -> Vec<f64> {
    let rabi: Vec<f64> = (0..=dist.cutoff()).map(|n| transition.rabi_frequency(n)).collect();
    times
        .iter()
        .map(|&t| {
            let damp = decoherence.contrast * (-decoherence.decay_rate * t).exp();
            dist.probabilities()
                .iter()
                .zip(&rabi)
                .map(|(p, w)| 0.5 * p * (damp * (w * t).cos() + 1.0))
                .sum()
        })
        .collect()
}

/// Spin sublevels of the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Down,
    Up,
}

/// Pure state on the {↓,↑} × Fock ladder.
#[derive(Debug, Clone)]
pub struct SpinFockState {
    down: Vec<C64>,
    up: Vec<C64>,
}

impl SpinFockState {
    /// Basis state |spin, n⟩ on a ladder truncated at `cutoff`.
    pub fn pure(spin: Spin, n: usize, cutoff: usize) -> Self {
        assert!(cutoff >= 1 && n <= cutoff);
        let mut state = SpinFockState {
            down: vec![C64::ZERO; cutoff + 1],
            up: vec![C64::ZERO; cutoff + 1],
        };
        match spin {
            Spin::Down => state.down[n] = C64::ONE,
            Spin::Up => state.up[n] = C64::ONE,
        }
        state
    }

    /// Build from explicit amplitude arrays; total norm must be 1 within 1e-9.
    pub fn from_amplitudes(down: Vec<C64>, up: Vec<C64>) -> Result<Self> {
        if down.len() != up.len() || down.len() < 2 {
            return Err(Error::Domain(
                "spin-Fock amplitudes need equal lengths and cutoff >= 1".into(),
            ));
        }
        let state = SpinFockState { down, up };
        if (state.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "spin-Fock state norm {} differs from 1 by more than 1e-9",
                state.norm()
            )));
        }
        Ok(state)
    }

    pub fn cutoff(&self) -> usize {
        self.down.len() - 1
    }

    pub fn norm(&self) -> f64 {
        self.down
            .iter()
            .chain(self.up.iter())
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn population(&self, spin: Spin, n: usize) -> f64 {
        match spin {
            Spin::Down => self.down[n].norm_sqr(),
            Spin::Up => self.up[n].norm_sqr(),
        }
    }

    pub fn p_down(&self) -> f64 {
        self.down.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Resonant evolution under the driven transition for time `t`, applied
    /// as exact two-level rotations on each coupled pair. Pairs whose partner
    /// lies above the cutoff are left untouched (ladder truncation).
    pub fn apply_transition(&mut self, transition: &TransitionSpec, t: f64) {
        let cutoff = self.cutoff();
        for n in 0..=cutoff {
            let Some(m) = transition.kind.partner(n) else { continue };
            if m > cutoff {
                continue;
            }
            let theta = 0.5 * transition.rabi_frequency(n) * t;
            let (c, s) = (theta.cos(), theta.sin());
            let g = self.down[n];
            let e = self.up[m];
            self.down[n] = c * g - C64::i() * s * e;
            self.up[m] = c * e - C64::i() * s * g;
        }
    }
}

/// Amplitude envelope of a shaped pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseEnvelope {
    Square,
    /// exp(−(t−T/2)²/2σ²)
    Gaussian { sigma: f64 },
    /// sin²(πt/T)
    SineSquared,
}

/// One shaped, optionally chirped pulse in the rotating frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedPulse {
    /// Total duration (s).
    pub duration: f64,
    pub envelope: PulseEnvelope,
    /// Peak Rabi frequency (rad/s).
    pub peak_rabi_frequency: f64,
    /// Detuning at mid-pulse (rad/s).
    pub center_detuning: f64,
    /// Linear chirp rate (rad/s²); the instantaneous detuning is
    /// center + offset + chirp·(t − duration/2).
    pub chirp_rate: f64,
    /// Drive phase (rad).
    pub phase: f64,
}

impl ShapedPulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Domain("pulse duration must be positive".into()));
        }
        if !self.chirp_rate.is_finite() {
            return Err(Error::Domain("chirp rate must be finite".into()));
        }
        if !(self.peak_rabi_frequency >= 0.0) {
            return Err(Error::Domain("pulse amplitude must be non-negative".into()));
        }
        if let PulseEnvelope::Gaussian { sigma } = self.envelope {
            if !(sigma > 0.0) {
                return Err(Error::Domain("gaussian sigma must be positive".into()));
            }
        }
        Ok(())
    }

    /// Instantaneous Rabi frequency Ω(t) (rad/s).
    pub fn amplitude(&self, t: f64) -> f64 {
        let shape = match self.envelope {
            PulseEnvelope::Square => 1.0,
            PulseEnvelope::Gaussian { sigma } => {
                let dt = t - 0.5 * self.duration;
                (-0.5 * dt * dt / (sigma * sigma)).exp()
            }
            PulseEnvelope::SineSquared => {
                let s = (std::f64::consts::PI * t / self.duration).sin();
                s * s
            }
        };
        self.peak_rabi_frequency * shape
    }

    /// Instantaneous detuning δ(t) including an external offset (rad/s).
    pub fn detuning(&self, t: f64, offset: f64) -> f64 {
        self.center_detuning + offset + self.chirp_rate * (t - 0.5 * self.duration)
    }

    /// Resonant square pulse of area π.
    pub fn square_pi(rabi_frequency: f64) -> Self {
        ShapedPulse {
            duration: std::f64::consts::PI / rabi_frequency,
            envelope: PulseEnvelope::Square,
            peak_rabi_frequency: rabi_frequency,
            center_detuning: 0.0,
            chirp_rate: 0.0,
            phase: 0.0,
        }
    }

    /// Resonant Gaussian pulse truncated at ±3σ with its area renormalized
    /// to π after truncation.
    pub fn gaussian_pi(duration: f64) -> Self {
        let sigma = duration / 6.0;
        let mut pulse = ShapedPulse {
            duration,
            envelope: PulseEnvelope::Gaussian { sigma },
            peak_rabi_frequency: 1.0,
            center_detuning: 0.0,
            chirp_rate: 0.0,
            phase: 0.0,
        };
        let area = pulse.area(4096);
        pulse.peak_rabi_frequency = std::f64::consts::PI / area;
        pulse
    }

    /// Rapid adiabatic passage: sine-squared envelope, linear chirp sweeping
    /// ±sweep_half_width across the line.
    pub fn rap(peak_rabi_frequency: f64, sweep_half_width: f64, duration: f64) -> Self {
        ShapedPulse {
            duration,
            envelope: PulseEnvelope::SineSquared,
            peak_rabi_frequency,
            center_detuning: 0.0,
            chirp_rate: 2.0 * sweep_half_width / duration,
            phase: 0.0,
        }
    }

    /// Pulse area ∫Ω(t)dt by Simpson's rule on `n` panels.
    pub fn area(&self, n: usize) -> f64 {
        let n = n.max(2) & !1;
        let h = self.duration / n as f64;
        let mut acc = self.amplitude(0.0) + self.amplitude(self.duration);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.amplitude(k as f64 * h);
        }
        acc * h / 3.0
    }
}

/// Result of a two-level integration.
#[derive(Debug, Clone, Copy)]
pub struct TwoLevelOutcome {
    /// Final (renormalized) amplitudes [ground, excited].
    pub amplitudes: [C64; 2],
    /// Final excited-state population.
    pub transfer: f64,
    /// |‖ψ‖ − 1| accumulated by the raw stepper before renormalization.
    pub norm_error: f64,
    /// Number of RK4 steps taken.
    pub steps: usize,
}

fn default_steps(pulse: &ShapedPulse, offset: f64) -> usize {
    let edge0 = pulse.detuning(0.0, offset).abs();
    let edge1 = pulse.detuning(pulse.duration, offset).abs();
    let w = pulse.peak_rabi_frequency.max(edge0).max(edge1);
    let by_rate = if w > 0.0 {
        (pulse.duration * 50.0 * w / std::f64::consts::TAU).ceil() as usize
    } else {
        0
    };
    by_rate.max(1000)
}

/// Rotating-frame two-level Schrödinger integration with a fixed RK4 step
/// count. Accuracy is set by the caller; [`integrate_two_level`] wraps this
/// with step doubling until the transfer probability is converged.
pub fn integrate_two_level_fixed(
    pulse: &ShapedPulse,
    initial: [C64; 2],
    detuning_offset: f64,
    steps: usize,
) -> TwoLevelOutcome {
    let h = pulse.duration / steps as f64;
    let drive = C64::from_polar(1.0, pulse.phase);

    // iċ = H c with H = ½ [[−δ, Ω e^{iφ}], [Ω e^{−iφ}, δ]]
    let deriv = |t: f64, c: [C64; 2]| -> [C64; 2] {
        let omega = pulse.amplitude(t);
        let delta = pulse.detuning(t, detuning_offset);
        let hgg = -0.5 * delta;
        let hge = 0.5 * omega * drive;
        [
            -C64::i() * (hgg * c[0] + hge * c[1]),
            -C64::i() * (hge.conj() * c[0] - hgg * c[1]),
        ]
    };

    let mut c = initial;
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = deriv(t, c);
        let k2 = deriv(t + 0.5 * h, add(c, scale(k1, 0.5 * h)));
        let k3 = deriv(t + 0.5 * h, add(c, scale(k2, 0.5 * h)));
        let k4 = deriv(t + h, add(c, scale(k3, h)));
        for i in 0..2 {
            c[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    let norm2 = c[0].norm_sqr() + c[1].norm_sqr();
    let norm = norm2.sqrt();
    TwoLevelOutcome {
        amplitudes: [c[0] / norm, c[1] / norm],
        transfer: c[1].norm_sqr() / norm2,
        norm_error: (norm - 1.0).abs(),
        steps,
    }
}

fn add(a: [C64; 2], b: [C64; 2]) -> [C64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(a: [C64; 2], s: f64) -> [C64; 2] {
    [a[0] * s, a[1] * s]
}

/// Integrate the rotating-frame two-level Schrödinger equation over a shaped
/// pulse, refining the step size until halving it moves the transfer
/// probability by less than [`INTEGRATOR_TOL`].
pub fn integrate_two_level(
    pulse: &ShapedPulse,
    initial: [C64; 2],
    detuning_offset: f64,
) -> Result<TwoLevelOutcome> {
    pulse.validate()?;
    let mut steps = default_steps(pulse, detuning_offset);
    let mut coarse = integrate_two_level_fixed(pulse, initial, detuning_offset, steps);
    for _ in 0..8 {
        let fine = integrate_two_level_fixed(pulse, initial, detuning_offset, 2 * steps);
        if (fine.transfer - coarse.transfer).abs() < INTEGRATOR_TOL {
            return Ok(fine);
        }
        steps *= 2;
        coarse = fine;
    }
    let fine = integrate_two_level_fixed(pulse, initial, detuning_offset, 2 * steps);
    Err(Error::Integration(format!(
        "step refinement stalled at {} steps; achieved transfer tolerance {:.3e} \
         (target {INTEGRATOR_TOL:.0e})",
        2 * steps,
        (fine.transfer - coarse.transfer).abs(),
    )))
}

/// Readout shelving schemes compared in the detuning scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutScheme {
    GaussianPi,
    SingleRap,
    DoubleRap,
}

/// Rapid-adiabatic-passage parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RapParams {
    /// Peak Rabi frequency (rad/s).
    pub peak_rabi_frequency: f64,
    /// Half-width of the frequency sweep (rad/s).
    pub sweep_half_width: f64,
    /// Pulse duration (s).
    pub duration: f64,
}

impl Default for RapParams {
    /// Firmly adiabatic sweep: peak 2π·150 kHz, ±2π·300 kHz over 200 µs.
    fn default() -> Self {
        use std::f64::consts::TAU;
        RapParams {
            peak_rabi_frequency: TAU * 150e3,
            sweep_half_width: TAU * 300e3,
            duration: 200e-6,
        }
    }
}

/// Parameters of the shaped readout pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutPulseParams {
    /// Lamb-Dicke factor of the shelving transition (carrier coupling
    /// Ω_{n,n} sets the n-dependence of the transfer).
    pub lamb_dicke: f64,
    pub rap: RapParams,
    /// Duration of the resonant Gaussian π pulse (s).
    pub gaussian_pi_duration: f64,
}

impl Default for ReadoutPulseParams {
    fn default() -> Self {
        ReadoutPulseParams {
            lamb_dicke: 0.059,
            rap: RapParams::default(),
            gaussian_pi_duration: 10e-6,
        }
    }
}

/// Transfer efficiency of a readout scheme versus central detuning, averaged
/// over the motional distribution with the carrier matrix element Ω_{n,n}
/// scaling each Fock component's Rabi frequency. The double-RAP composes the
/// residual of the first pass through a second sweep:
/// eff = T1 + (1 − T1)·T2.
pub fn readout_transfer_curve(
    scheme: ReadoutScheme,
    detuning_grid: &[f64],
    motional_spread: &PhononDistribution,
    params: &ReadoutPulseParams,
) -> Result<Vec<f64>> {
    if detuning_grid.is_empty() {
        return Err(Error::Domain("detuning grid must be non-empty".into()));
    }
    let couplings: Vec<f64> = (0..=motional_spread.cutoff())
        .map(|n| sideband_matrix_element(n, n, params.lamb_dicke).abs())
        .collect();
    let ground = [C64::ONE, C64::ZERO];

    let eff = |delta: f64| -> f64 {
        motional_spread
            .probabilities()
            .iter()
            .zip(&couplings)
            .map(|(p, m)| {
                let t = match scheme {
                    ReadoutScheme::GaussianPi => {
                        let mut pulse = ShapedPulse::gaussian_pi(params.gaussian_pi_duration);
                        pulse.peak_rabi_frequency *= m;
                        let steps = default_steps(&pulse, delta);
                        integrate_two_level_fixed(&pulse, ground, delta, steps).transfer
                    }
                    ReadoutScheme::SingleRap => rap_transfer(&params.rap, *m, delta),
                    ReadoutScheme::DoubleRap => {
                        let t1 = rap_transfer(&params.rap, *m, delta);
                        let t2 = rap_transfer(&params.rap, *m, delta);
                        t1 + (1.0 - t1) * t2
                    }
                };
                p * t
            })
            .sum()
    };

    Ok(detuning_grid.par_iter().map(|&d| eff(d)).collect())
}

fn rap_transfer(rap: &RapParams, coupling: f64, offset: f64) -> f64 {
    let pulse = ShapedPulse::rap(rap.peak_rabi_frequency * coupling, rap.sweep_half_width, rap.duration);
    let steps = default_steps(&pulse, offset);
    integrate_two_level_fixed(&pulse, [C64::ONE, C64::ZERO], offset, steps).transfer
}

/// Full width at half maximum of a sampled curve by linear interpolation of
/// the half-maximum crossings around the peak.
pub fn curve_fwhm(grid: &[f64], values: &[f64]) -> Option<f64> {
    let (peak_idx, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let half = 0.5 * peak;
    let mut left = None;
    for i in (1..=peak_idx).rev() {
        if values[i - 1] <= half && values[i] > half {
            let f = (half - values[i - 1]) / (values[i] - values[i - 1]);
            left = Some(grid[i - 1] + f * (grid[i] - grid[i - 1]));
            break;
        }
    }
    let mut right = None;
    for i in peak_idx..values.len() - 1 {
        if values[i] > half && values[i + 1] <= half {
            let f = (values[i] - half) / (values[i] - values[i + 1]);
            right = Some(grid[i] + f * (grid[i + 1] - grid[i]));
            break;
        }
    }
    Some(right? - left?)
}

/// Ramsey fringe scan outcome.
#[derive(Debug, Clone)]
pub struct RamseyScan {
    /// Shift-pulse durations (s).
    pub durations: Vec<f64>,
    /// Fringe signal ½(1 + cos(Δ_S t)).
    pub signal: Vec<f64>,
    /// Stark shift implied by the beam parameters (rad/s).
    pub true_shift: f64,
    /// Shift recovered from the fringe fit (rad/s).
    pub extracted_shift: f64,
    /// Fitted fringe period t_R = 2π/Δ_S (s).
    pub fringe_period: f64,
    /// Root-mean-square fit residual.
    pub fit_residual: f64,
}

/// Ideal Ramsey fringe ½(1 + cos(Δ_S t)) sampled at the given durations.
pub fn ramsey_fringe_signal(stark_shift: f64, durations: &[f64]) -> Vec<f64> {
    durations.iter().map(|&t| 0.5 * (1.0 + (stark_shift * t).cos())).collect()
}

/// Recover the fringe frequency from a Ramsey signal by least-squares over a
/// dense frequency grid with golden-section refinement. Errors out when the
/// scan holds less than one full fringe or no fringe at all.
pub fn extract_stark_shift(durations: &[f64], signal: &[f64]) -> Result<(f64, f64)> {
    if durations.len() != signal.len() || durations.len() < 4 {
        return Err(Error::Fit("need at least 4 samples to fit a fringe".into()));
    }
    let span = durations.iter().cloned().fold(f64::MIN, f64::max)
        - durations.iter().cloned().fold(f64::MAX, f64::min);
    if !(span > 0.0) {
        return Err(Error::Fit("degenerate duration axis".into()));
    }
    let mean: f64 = signal.iter().sum::<f64>() / signal.len() as f64;
    let swing = signal.iter().map(|y| (y - mean).abs()).fold(0.0, f64::max);
    if swing < 1e-3 {
        return Err(Error::Fit("no fringe: signal is flat over the scanned range".into()));
    }

    let residual = |w: f64| -> f64 {
        // least squares of y ≈ a cos(wt) + b sin(wt) + c, closed form
        let n = durations.len() as f64;
        let (mut cc, mut cs, mut ss, mut sc1, mut ss1, mut yc, mut ys, mut y1) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, &y) in durations.iter().zip(signal) {
            let (s, c) = (w * t).sin_cos();
            cc += c * c;
            cs += c * s;
            ss += s * s;
            sc1 += c;
            ss1 += s;
            yc += y * c;
            ys += y * s;
            y1 += y;
        }
        let a_mat = nalgebra::Matrix3::new(cc, cs, sc1, cs, ss, ss1, sc1, ss1, n);
        let rhs = nalgebra::Vector3::new(yc, ys, y1);
        let Some(sol) = a_mat.lu().solve(&rhs) else { return f64::INFINITY };
        durations
            .iter()
            .zip(signal)
            .map(|(&t, &y)| {
                let (s, c) = (w * t).sin_cos();
                let m = sol[0] * c + sol[1] * s + sol[2];
                (y - m) * (y - m)
            })
            .sum()
    };

    let w_min = std::f64::consts::TAU / span;
    let gaps: Vec<f64> = durations.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let min_gap = gaps.iter().cloned().filter(|g| *g > 0.0).fold(f64::MAX, f64::min);
    let w_max = std::f64::consts::PI / min_gap;
    let grid_n = 4000;
    let mut best = (f64::INFINITY, w_min);
    for k in 0..=grid_n {
        let w = w_min + (w_max - w_min) * k as f64 / grid_n as f64;
        let r = residual(w);
        if r < best.0 {
            best = (r, w);
        }
    }
    // golden-section polish around the grid minimum
    let dw = (w_max - w_min) / grid_n as f64;
    let (mut lo, mut hi) = (best.1 - dw, best.1 + dw);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if residual(m1) < residual(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let w_best = 0.5 * (lo + hi);
    if w_best <= w_min * (1.0 + 1e-9) {
        return Err(Error::Fit(
            "no full fringe within the scanned range; extend the shift-pulse scan".into(),
        ));
    }
    let rms = (residual(w_best) / durations.len() as f64).sqrt();
    Ok((w_best, rms))
}

/// Scan the duration of an off-resonant shift pulse inside a Ramsey gap and
/// extract the AC-Stark shift from the fringe period.
pub fn ramsey_stark_scan(
    shift_beam: &LaserBeamSpec,
    shift_pulse_durations: &[f64],
    ramsey_gap: f64,
) -> Result<RamseyScan> {
    shift_beam.validate()?;
    if shift_pulse_durations.is_empty() {
        return Err(Error::Domain("duration scan must be non-empty".into()));
    }
    if shift_pulse_durations.iter().any(|&t| t < 0.0 || t > ramsey_gap) {
        return Err(Error::Domain(format!(
            "shift pulse durations must lie within the Ramsey gap of {ramsey_gap} s"
        )));
    }
    let shift = ac_stark_shift(shift_beam.resonant_rabi_frequency, shift_beam.detuning)?;
    let signal = ramsey_fringe_signal(shift, shift_pulse_durations);
    let (extracted, rms) = extract_stark_shift(shift_pulse_durations, &signal)?;
    Ok(RamseyScan {
        durations: shift_pulse_durations.to_vec(),
        signal,
        true_shift: shift,
        extracted_shift: extracted,
        fringe_period: std::f64::consts::TAU / extracted,
        fit_residual: rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{thermal_distribution, TransitionKind};
    use approx::assert_relative_eq;
    use rand::Rng;
    use std::f64::consts::{PI, TAU};

    fn bsb(omega0: f64, eta: f64) -> TransitionSpec {
        TransitionSpec {
            base_rabi_frequency: omega0,
            lamb_dicke: eta,
            kind: TransitionKind::BlueSideband,
            detuning: 0.0,
        }
    }

    #[test]
    fn flop_signal_at_zero_time_hits_contrast_ceiling() {
        let dist = thermal_distribution(1.0, 40).unwrap();
        let deco = DecoherenceModel { decay_rate: 1.0 / 280e-6, contrast: 0.96 };
        let p = flop_signal(&dist, &bsb(TAU * 100e3, 0.21), &deco, &[0.0]);
        assert_relative_eq!(p[0], 0.98, epsilon = 1e-12);
    }

    #[test]
    fn flop_signal_pure_ground_full_transfer_at_pi_time() {
        let dist = PhononDistribution::pure(0, 10);
        let deco = DecoherenceModel { decay_rate: 0.0, contrast: 1.0 };
        let tr = bsb(TAU * 100e3, 0.21);
        let t_pi = PI / tr.rabi_frequency(0);
        let p = flop_signal(&dist, &tr, &deco, &[t_pi]);
        assert!(p[0].abs() < 1e-12, "p = {}", p[0]);
    }

    #[test]
    fn flop_signal_matches_independent_summation_oracle() {
        // Fig. 5a-style scenario: thermal 0.24, eta 0.21, 280 us coherence
        let dist = thermal_distribution(0.24, 20).unwrap();
        let deco = DecoherenceModel::default();
        let omega0 = TAU * 100e3;
        let tr = bsb(omega0, 0.21);
        let times: Vec<f64> = (0..400).map(|k| k as f64 * 1e-6).collect();
        let model = flop_signal(&dist, &tr, &deco, &times);

        // oracle: explicit polynomial Laguerre evaluation, no shared code path
        let lag1 = |n: usize, x: f64| -> f64 {
            let mut acc = 0.0;
            let mut binom = (n + 1) as f64; // C(n+1, n-k) for k = 0
            let mut fact = 1.0;
            for k in 0..=n {
                if k > 0 {
                    binom *= (n - k + 1) as f64 / ((k + 1) as f64);
                    fact *= k as f64;
                }
                acc += (if k % 2 == 0 { 1.0 } else { -1.0 }) * binom * x.powi(k as i32) / fact;
            }
            acc
        };
        let eta: f64 = 0.21;
        let x = eta * eta;
        for (k, &t) in times.iter().enumerate() {
            let mut p = 0.0;
            for (n, pn) in dist.probabilities().iter().enumerate() {
                let elem = (-0.5 * x).exp() * eta / ((n + 1) as f64).sqrt() * lag1(n, x);
                let w = omega0 * elem;
                p += 0.5 * pn * (0.96 * (w * t).cos() * (-deco.decay_rate * t).exp() + 1.0);
            }
            assert_relative_eq!(model[k], p, epsilon = 1e-12);
        }

        // first minimum is a deep dip
        let first_min = model
            .windows(3)
            .position(|w| w[1] < w[0] && w[1] < w[2])
            .map(|i| model[i + 1])
            .unwrap();
        assert!(first_min < 0.1, "first minimum {first_min}");
    }

    #[test]
    fn flop_signal_single_fock_period_via_autocorrelation() {
        let dist = PhononDistribution::pure(3, 12);
        let deco = DecoherenceModel { decay_rate: 0.0, contrast: 1.0 };
        let tr = bsb(TAU * 100e3, 0.21);
        let period = TAU / tr.rabi_frequency(3);
        let dt = period / 64.0;
        let times: Vec<f64> = (0..640).map(|k| k as f64 * dt).collect();
        let p = flop_signal(&dist, &tr, &deco, &times);
        // autocorrelation peak at one period, within one time step
        let n = p.len();
        let mean = p.iter().sum::<f64>() / n as f64;
        let score = |lag: usize| -> f64 {
            (0..n - lag).map(|i| (p[i] - mean) * (p[i + lag] - mean)).sum::<f64>()
                / (n - lag) as f64
        };
        let best = (32..96).max_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap();
        assert!((best as isize - 64).unsigned_abs() <= 1, "lag {best}");
    }

    #[test]
    fn ladder_propagation_agrees_with_flop_signal() {
        let dist = thermal_distribution(0.5, 16).unwrap();
        let tr = bsb(TAU * 100e3, 0.21);
        let deco = DecoherenceModel { decay_rate: 0.0, contrast: 1.0 };
        for &t in &[3e-6, 17e-6, 60e-6] {
            let closed = flop_signal(&dist, &tr, &deco, &[t])[0];
            let mut ladder = 0.0;
            for (n, pn) in dist.probabilities().iter().enumerate() {
                let mut state = SpinFockState::pure(Spin::Down, n, dist.cutoff() + 1);
                state.apply_transition(&tr, t);
                ladder += pn * state.p_down();
            }
            assert_relative_eq!(closed, ladder, epsilon = 1e-12);
        }
    }

    #[test]
    fn spin_fock_state_norm_is_preserved() {
        let mut state = SpinFockState::pure(Spin::Down, 2, 8);
        let tr = bsb(TAU * 100e3, 0.21);
        for _ in 0..50 {
            state.apply_transition(&tr, 7e-6);
        }
        assert_relative_eq!(state.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn integrator_zero_amplitude_no_transfer() {
        let pulse = ShapedPulse {
            duration: 10e-6,
            envelope: PulseEnvelope::Square,
            peak_rabi_frequency: 0.0,
            center_detuning: TAU * 50e3,
            chirp_rate: 0.0,
            phase: 0.0,
        };
        let out = integrate_two_level(&pulse, [C64::ONE, C64::ZERO], 0.0).unwrap();
        assert!(out.transfer < 1e-15);
    }

    #[test]
    fn integrator_square_pi_pulse_full_transfer() {
        let pulse = ShapedPulse::square_pi(TAU * 100e3);
        let out = integrate_two_level(&pulse, [C64::ONE, C64::ZERO], 0.0).unwrap();
        assert!((out.transfer - 1.0).abs() < 1e-6, "transfer {}", out.transfer);
    }

    #[test]
    fn integrator_matches_rabi_formula_on_random_pulses() {
        let mut rng = crate::rng::derive_stream(11, &[0]);
        for _ in 0..100 {
            let omega = TAU * (20e3 + 180e3 * rng.random::<f64>());
            let delta = TAU * 200e3 * (rng.random::<f64>() - 0.5);
            let t = 30e-6 * rng.random::<f64>();
            let pulse = ShapedPulse {
                duration: t.max(1e-7),
                envelope: PulseEnvelope::Square,
                peak_rabi_frequency: omega,
                center_detuning: delta,
                chirp_rate: 0.0,
                phase: 0.0,
            };
            let out = integrate_two_level(&pulse, [C64::ONE, C64::ZERO], 0.0).unwrap();
            let oracle = crate::physics::generalized_rabi_transfer(omega, delta, pulse.duration);
            assert!(
                (out.transfer - oracle).abs() < 1e-6,
                "transfer {} vs oracle {}",
                out.transfer,
                oracle
            );
            assert!(out.norm_error < 1e-8);
        }
    }

    #[test]
    fn integrator_converges_under_step_halving() {
        let pulse = ShapedPulse::rap(TAU * 150e3, TAU * 300e3, 200e-6);
        let out = integrate_two_level(&pulse, [C64::ONE, C64::ZERO], 0.0).unwrap();
        let refined =
            integrate_two_level_fixed(&pulse, [C64::ONE, C64::ZERO], 0.0, out.steps * 2);
        assert!((out.transfer - refined.transfer).abs() < 1e-6);
        assert!(out.norm_error < 1e-8);
    }

    #[test]
    fn integrator_landau_zener_oracle() {
        // square envelope, wide linear sweep: transfer = 1 - exp(-πΩ²/2r)
        for gamma_lz in [0.5, 1.0, 2.0] {
            let omega = TAU * 20e3;
            let rate = PI * omega * omega / (2.0 * gamma_lz);
            let span = TAU * 2e6; // sweep across ±1 MHz, far outside the line
            let duration = span / rate;
            let pulse = ShapedPulse {
                duration,
                envelope: PulseEnvelope::Square,
                peak_rabi_frequency: omega,
                center_detuning: 0.0,
                chirp_rate: rate,
                phase: 0.0,
            };
            let out = integrate_two_level(&pulse, [C64::ONE, C64::ZERO], 0.0).unwrap();
            let oracle = 1.0 - (-PI * omega * omega / (2.0 * rate)).exp();
            assert!(
                (out.transfer - oracle).abs() < 0.02 * oracle.max(0.1),
                "LZ gamma {gamma_lz}: {} vs {}",
                out.transfer,
                oracle
            );
        }
    }

    #[test]
    fn gaussian_pi_pulse_area_is_pi() {
        let pulse = ShapedPulse::gaussian_pi(10e-6);
        assert_relative_eq!(pulse.area(8192), PI, max_relative = 1e-6);
        let out = integrate_two_level(&pulse, [C64::ONE, C64::ZERO], 0.0).unwrap();
        assert!((out.transfer - 1.0).abs() < 1e-4, "transfer {}", out.transfer);
    }

    #[test]
    fn readout_double_rap_dominates_single_rap_pointwise() {
        let spread = thermal_distribution(0.3, 14).unwrap();
        let params = ReadoutPulseParams {
            rap: RapParams { duration: 30e-6, ..RapParams::default() },
            ..ReadoutPulseParams::default()
        };
        let grid: Vec<f64> = (-10..=10).map(|k| TAU * 50e3 * k as f64).collect();
        let single =
            readout_transfer_curve(ReadoutScheme::SingleRap, &grid, &spread, &params).unwrap();
        let double =
            readout_transfer_curve(ReadoutScheme::DoubleRap, &grid, &spread, &params).unwrap();
        for (s, d) in single.iter().zip(&double) {
            assert!(*d >= *s - 1e-12 && *s >= 0.0);
        }
    }

    #[test]
    fn readout_gaussian_pi_dies_far_off_resonance() {
        let spread = PhononDistribution::ground(4);
        let params = ReadoutPulseParams::default();
        let grid = [TAU * 5e6];
        let eff =
            readout_transfer_curve(ReadoutScheme::GaussianPi, &grid, &spread, &params).unwrap();
        assert!(eff[0] < 1e-2, "eff {}", eff[0]);
    }

    #[test]
    fn readout_rejects_empty_grid() {
        let spread = PhononDistribution::ground(4);
        assert!(readout_transfer_curve(
            ReadoutScheme::SingleRap,
            &[],
            &spread,
            &ReadoutPulseParams::default()
        )
        .is_err());
    }

    #[test]
    fn ramsey_scan_recovers_known_shift() {
        // 2π·0.32 MHz shift: fringe period 3.125 µs
        let durations: Vec<f64> = (0..200).map(|k| k as f64 * 0.05e-6).collect();
        let signal = ramsey_fringe_signal(TAU * 0.32e6, &durations);
        let (w, _) = extract_stark_shift(&durations, &signal).unwrap();
        assert_relative_eq!(TAU / w, 3.125e-6, max_relative = 1e-4);

        // synthetic 2π·120 kHz differential shift, recovered within 1%
        let signal = ramsey_fringe_signal(TAU * 120e3, &durations);
        let (w, _) = extract_stark_shift(&durations, &signal).unwrap();
        assert!((w / (TAU * 120e3) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn ramsey_scan_flat_signal_reports_no_fringe() {
        let durations: Vec<f64> = (0..100).map(|k| k as f64 * 0.5e-6).collect();
        let signal = ramsey_fringe_signal(0.0, &durations);
        let err = extract_stark_shift(&durations, &signal).unwrap_err();
        assert!(err.to_string().contains("no fringe"), "{err}");
    }

    #[test]
    fn ramsey_scan_round_trip_many_random_shifts() {
        let mut rng = crate::rng::derive_stream(5, &[9]);
        let durations: Vec<f64> = (0..251).map(|k| k as f64 * 0.2e-6).collect();
        for _ in 0..50 {
            let shift = TAU * (60e3 + 900e3 * rng.random::<f64>());
            let signal = ramsey_fringe_signal(shift, &durations);
            let (w, _) = extract_stark_shift(&durations, &signal).unwrap();
            assert!(
                (w - shift).abs() / shift < 1e-2,
                "shift {shift} recovered {w}"
            );
        }
    }

    #[test]
    fn ramsey_scan_rejects_durations_beyond_gap() {
        let beam = LaserBeamSpec {
            resonant_rabi_frequency: TAU * 90e6,
            detuning: TAU * 40e9,
            wavelength: 397e-9,
            angle_to_trap_axis: 1.0,
            label: crate::physics::BeamLabel::R1,
        };
        let durations: Vec<f64> = (0..40).map(|k| k as f64 * 2e-6).collect();
        assert!(ramsey_stark_scan(&beam, &durations, 50e-6).is_err());
    }
}
