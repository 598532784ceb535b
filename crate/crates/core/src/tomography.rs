//! Inverse pipeline: cosine-transform spectral analysis of sideband Rabi
//! traces, constrained least-squares deconvolution onto the damped-cosine
//! dictionary, mean-phonon and heating-rate estimation, and Monte-Carlo
//! self-validation against the forward simulator.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynamics::{flop_signal, DecoherenceModel};
use crate::error::{Error, Result};
use crate::physics::{sideband_matrix_element, PhononDistribution, TransitionSpec};
use crate::rng::{binomial, derive_stream};
use crate::sequence::{detect, ReadoutModel};

/// Measured Rabi-oscillation trace on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiTrace {
    times: Vec<f64>,
    p_down: Vec<f64>,
    shots_per_point: u32,
}

impl RabiTrace {
    pub fn new(times: Vec<f64>, p_down: Vec<f64>, shots_per_point: u32) -> Result<Self> {
        if times.len() != p_down.len() {
            return Err(Error::Domain("trace time and probability lengths differ".into()));
        }
        if times.len() < 2 {
            return Err(Error::Domain("trace needs at least two samples".into()));
        }
        if p_down.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
            return Err(Error::Domain("trace probabilities must lie in [0, 1]".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::Domain("trace times must be strictly increasing".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::Domain(format!(
                    "trace times must be strictly increasing (sample {})",
                    i + 1
                )));
            }
            if ((step - dt) / dt).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "trace time grid is not uniform at sample {} ({} vs {})",
                    i + 1,
                    step,
                    dt
                )));
            }
        }
        Ok(RabiTrace { times, p_down, shots_per_point })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn p_down(&self) -> &[f64] {
        &self.p_down
    }

    pub fn shots_per_point(&self) -> u32 {
        self.shots_per_point
    }

    pub fn time_step(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Cosine-transform spectrum with the predicted sideband line positions.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Frequency grid (rad/s).
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Predicted flopping frequencies Ω_{n,n+1} (rad/s).
    pub predicted_lines: Vec<f64>,
}

/// Mean-removed cosine transform
/// magnitude(ω) = (2/N) Σ_k (p_k − mean) cos(ω t_k).
pub fn cosine_transform(trace: &RabiTrace, frequency_grid: &[f64]) -> SpectrumReport {
    let n = trace.p_down.len() as f64;
    let mean = trace.p_down.iter().sum::<f64>() / n;
    let magnitudes = frequency_grid
        .iter()
        .map(|&w| {
            2.0 / n
                * trace
                    .times
                    .iter()
                    .zip(&trace.p_down)
                    .map(|(&t, &p)| (p - mean) * (w * t).cos())
                    .sum::<f64>()
        })
        .collect();
    SpectrumReport {
        frequencies: frequency_grid.to_vec(),
        magnitudes,
        predicted_lines: Vec::new(),
    }
}

/// Blue-sideband flopping frequencies Ω_{n,n+1} = Ω0·|⟨n|..|n+1⟩| for
/// n = 0..=n_max, indexed by n.
pub fn predict_line_positions(omega0: f64, eta: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| omega0 * sideband_matrix_element(n, n + 1, eta).abs())
        .collect()
}

/// Spectrum on the standard display grid: the dictionary line spacing
/// oversampled 4×, capped at the Nyquist limit of the time grid. Errors out
/// if a predicted line exceeds Nyquist (the trace cannot support it).
pub fn spectrum_with_lines(
    trace: &RabiTrace,
    omega0: f64,
    eta: f64,
    n_max: usize,
) -> Result<SpectrumReport> {
    let lines = predict_line_positions(omega0, eta, n_max);
    let nyquist = std::f64::consts::PI / trace.time_step();
    let max_line = lines.iter().cloned().fold(0.0f64, f64::max);
    if max_line > nyquist {
        return Err(Error::Domain(format!(
            "predicted line at {max_line:.3e} rad/s exceeds the Nyquist limit {nyquist:.3e}; \
             the time grid is too coarse for n_max = {n_max}"
        )));
    }
    let min_spacing = lines
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::MAX, f64::min)
        .min(max_line.max(1.0));
    let step = min_spacing / 4.0;
    let upper = (1.25 * max_line).min(nyquist);
    let count = (upper / step).ceil() as usize;
    let grid: Vec<f64> = (0..=count).map(|k| k as f64 * step).collect();
    let mut report = cosine_transform(trace, &grid);
    report.predicted_lines = lines;
    Ok(report)
}

/// Deconvolution controls.
#[derive(Debug, Clone)]
pub struct DeconvolveOptions {
    pub max_iterations: usize,
    /// Relative residual change at which the alternating fit stops.
    pub tolerance: f64,
    /// Bootstrap resamples for the P_n uncertainties; 0 skips the bootstrap.
    pub bootstrap_resamples: usize,
    /// Seed of the bootstrap resampling streams.
    pub seed: u64,
}

impl Default for DeconvolveOptions {
    fn default() -> Self {
        DeconvolveOptions {
            max_iterations: 200,
            tolerance: 1e-8,
            bootstrap_resamples: 200,
            seed: 0,
        }
    }
}

/// Reconstructed phonon distribution with the Eq.-style signal parameters.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub distribution: PhononDistribution,
    /// Readout contrast A.
    pub contrast: f64,
    /// Coherence decay rate γ (1/s).
    pub decay_rate: f64,
    /// Mean phonon number of the reconstruction.
    pub mean_phonon: f64,
    /// Truncation bound P_cutoff · cutoff on the mean.
    pub mean_tail_bound: f64,
    /// ‖model − trace‖₂ at the solution.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Bootstrap standard deviation per P_n (empty when disabled).
    pub p_sigma: Vec<f64>,
    /// Bootstrap standard deviation of the mean phonon number.
    pub nbar_sigma: Option<f64>,
    /// Bootstrap reconstructions that failed to converge.
    pub bootstrap_failures: usize,
}

/// Damped-cosine dictionary M[k][j] = ½ e^{−γ t_k} cos(ω_j t_k).
fn dictionary(times: &[f64], lines: &[f64], decay: f64) -> DMatrix<f64> {
    DMatrix::from_fn(times.len(), lines.len(), |k, j| {
        0.5 * (-decay * times[k]).exp() * (lines[j] * times[k]).cos()
    })
}

/// Non-negative least squares by the Lawson-Hanson active-set method on the
/// precomputed normal equations.
fn nnls(gram: &DMatrix<f64>, rhs: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let n = gram.ncols();
    let mut passive = vec![false; n];
    let mut x = DVector::<f64>::zeros(n);
    let scale = rhs.amax().max(1e-300);
    let tol = 1e-12 * scale;

    for _ in 0..max_iter {
        // gradient of ½‖Ax − b‖²: w = rhs − G x
        let w = rhs - gram * &x;
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| gram[(idx[r], idx[c])]);
            let sub_rhs = DVector::from_fn(idx.len(), |r, _| rhs[idx[r]]);
            let z = sub
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&sub_rhs))
                .unwrap_or_else(|| sub.svd(true, true).solve(&sub_rhs, 1e-14).unwrap());
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (r, &k) in idx.iter().enumerate() {
                    x[k] = z[r];
                }
                break;
            }
            // step toward z until the first passive variable hits zero
            let mut alpha = 1.0f64;
            for (r, &k) in idx.iter().enumerate() {
                if z[r] <= 0.0 {
                    let denom = x[k] - z[r];
                    if denom > 0.0 {
                        alpha = alpha.min(x[k] / denom);
                    }
                }
            }
            for (r, &k) in idx.iter().enumerate() {
                x[k] += alpha * (z[r] - x[k]);
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    x
}

struct FitState {
    weights: DVector<f64>,
    contrast: f64,
    decay: f64,
    residual: f64,
}

fn residual_norm(
    times: &[f64],
    signal: &DVector<f64>,
    lines: &[f64],
    weights: &DVector<f64>,
    contrast: f64,
    decay: f64,
) -> f64 {
    let m = dictionary(times, lines, decay);
    let model = m * (weights * contrast);
    (signal - model).norm()
}

fn fit_once(
    trace: &RabiTrace,
    lines: &[f64],
    init_contrast: f64,
    init_decay: f64,
    opts: &DeconvolveOptions,
) -> Result<(FitState, usize, Vec<f64>)> {
    let times = trace.times();
    let signal = DVector::from_iterator(times.len(), trace.p_down().iter().map(|p| p - 0.5));

    let mut state = FitState {
        weights: DVector::zeros(lines.len()),
        contrast: init_contrast.clamp(1e-3, 1.0),
        decay: init_decay.max(0.0),
        residual: f64::INFINITY,
    };
    let span = times.last().unwrap() - times[0];
    let mut decay_step = if state.decay > 0.0 { 0.5 * state.decay } else { 0.25 / span };
    let mut history = Vec::new();

    for iter in 0..opts.max_iterations {
        // (1) non-negative least squares for the level weights q = A·P
        let m = dictionary(times, lines, state.decay);
        let gram = m.transpose() * &m;
        let rhs = m.transpose() * &signal;
        let q = nnls(&gram, &rhs, 8 * lines.len().max(4));
        let total: f64 = q.sum();
        if total > 0.0 {
            state.weights = &q / total;
            state.contrast = total.clamp(1e-3, 1.0);
        }

        // (2) closed-form contrast refinement, accepted only on improvement
        let shape = &m * &state.weights;
        let denom = shape.dot(&shape);
        if denom > 0.0 {
            let a_opt = (shape.dot(&signal) / denom).clamp(1e-3, 1.0);
            let trial = residual_norm(times, &signal, lines, &state.weights, a_opt, state.decay);
            let current =
                residual_norm(times, &signal, lines, &state.weights, state.contrast, state.decay);
            if trial <= current {
                state.contrast = a_opt;
            }
        }

        // (3) decay-rate step with halving on failure
        state.residual =
            residual_norm(times, &signal, lines, &state.weights, state.contrast, state.decay);
        let mut improved = false;
        for candidate in [state.decay + decay_step, (state.decay - decay_step).max(0.0)] {
            let trial =
                residual_norm(times, &signal, lines, &state.weights, state.contrast, candidate);
            if trial < state.residual {
                state.decay = candidate;
                state.residual = trial;
                improved = true;
                break;
            }
        }
        if !improved {
            decay_step *= 0.5;
        }

        let converged = match history.last() {
            Some(&prev) => {
                let prev: f64 = prev;
                (prev - state.residual).abs() <= opts.tolerance * prev.max(1e-30)
                    || state.residual < 1e-13 * (times.len() as f64).sqrt()
            }
            None => false,
        };
        history.push(state.residual);
        if converged {
            return Ok((state, iter + 1, history));
        }
    }

    Err(Error::Nonconvergence {
        iterations: opts.max_iterations,
        residual: state.residual,
        history,
        best_probabilities: state.weights.iter().cloned().collect(),
        best_contrast: state.contrast,
        best_decay_rate: state.decay,
    })
}

/// Reconstruct {P_n, A, γ} from a sideband Rabi trace by alternating
/// non-negative least squares on the damped-cosine dictionary with 1-D
/// refinements of the contrast and decay rate. `line_positions[j]` is the
/// flopping frequency of level j, as from [`predict_line_positions`].
pub fn deconvolve(
    trace: &RabiTrace,
    line_positions: &[f64],
    init_contrast: f64,
    init_decay: f64,
    opts: &DeconvolveOptions,
) -> Result<ReconstructionResult> {
    if line_positions.is_empty() {
        return Err(Error::Domain("deconvolution needs at least one line".into()));
    }
    if trace.times().len() < 4 * line_positions.len() {
        return Err(Error::Domain(format!(
            "trace too short: {} samples for {} lines (need at least 4 per line)",
            trace.times().len(),
            line_positions.len()
        )));
    }

    let (state, iterations, _history) =
        fit_once(trace, line_positions, init_contrast, init_decay, opts)?;
    let result = build_result(trace, line_positions, &state, iterations, opts)?;
    Ok(result)
}

fn build_result(
    trace: &RabiTrace,
    lines: &[f64],
    state: &FitState,
    iterations: usize,
    opts: &DeconvolveOptions,
) -> Result<ReconstructionResult> {
    // pad to the minimum ladder so the distribution invariants hold
    let mut probs: Vec<f64> = state.weights.iter().cloned().collect();
    while probs.len() < 2 {
        probs.push(0.0);
    }
    let distribution = PhononDistribution::from_weights(probs)?;
    let (mean, tail) = mean_phonon(&distribution);

    let mut result = ReconstructionResult {
        distribution,
        contrast: state.contrast,
        decay_rate: state.decay,
        mean_phonon: mean,
        mean_tail_bound: tail,
        residual_norm: state.residual,
        iterations,
        p_sigma: Vec::new(),
        nbar_sigma: None,
        bootstrap_failures: 0,
    };

    if opts.bootstrap_resamples > 0 && trace.shots_per_point() > 0 {
        let shots = trace.shots_per_point();
        let resamples: Vec<Option<(Vec<f64>, f64)>> = (0..opts.bootstrap_resamples)
            .into_par_iter()
            .map(|rep| {
                let mut rng = derive_stream(opts.seed, &[0xb0_07, rep as u64]);
                let p_resampled: Vec<f64> = trace
                    .p_down()
                    .iter()
                    .map(|&p| binomial(&mut rng, shots, p) as f64 / shots as f64)
                    .collect();
                let resampled =
                    RabiTrace::new(trace.times().to_vec(), p_resampled, shots).ok()?;
                let nested = DeconvolveOptions { bootstrap_resamples: 0, ..opts.clone() };
                let (s, _, _) =
                    fit_once(&resampled, lines, state.contrast, state.decay, &nested).ok()?;
                let probs: Vec<f64> = s.weights.iter().cloned().collect();
                let mean = probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
                Some((probs, mean))
            })
            .collect();

        let ok: Vec<&(Vec<f64>, f64)> = resamples.iter().flatten().collect();
        result.bootstrap_failures = opts.bootstrap_resamples - ok.len();
        if ok.len() >= 2 {
            let m = ok.len() as f64;
            let mut sigma = vec![0.0; lines.len()];
            for (j, s) in sigma.iter_mut().enumerate() {
                let mean_j: f64 = ok.iter().map(|(p, _)| p[j]).sum::<f64>() / m;
                let var: f64 =
                    ok.iter().map(|(p, _)| (p[j] - mean_j).powi(2)).sum::<f64>() / (m - 1.0);
                *s = var.sqrt();
            }
            let mean_nbar: f64 = ok.iter().map(|(_, nb)| nb).sum::<f64>() / m;
            let var_nbar: f64 =
                ok.iter().map(|(_, nb)| (nb - mean_nbar).powi(2)).sum::<f64>() / (m - 1.0);
            result.p_sigma = sigma;
            result.nbar_sigma = Some(var_nbar.sqrt());
        }
    }
    Ok(result)
}

/// Mean phonon number with the truncation bound P_cutoff · cutoff.
pub fn mean_phonon(dist: &PhononDistribution) -> (f64, f64) {
    let mean = dist.mean();
    let bound = dist.top_state_occupancy() * dist.cutoff() as f64;
    (mean, bound)
}

/// Weighted linear fit of n̄ versus delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingFit {
    /// Heating rate ṅ (phonons/s).
    pub rate: f64,
    pub rate_stderr: f64,
    /// n̄ at zero delay.
    pub intercept: f64,
    pub intercept_stderr: f64,
}

/// Weighted linear least squares through (delay, n̄ ± σ) points. Points with
/// σ ≤ 0 enter with unit weight; when no point carries a σ the parameter
/// errors are scaled by the residual variance instead.
pub fn heating_rate_fit(points: &[(f64, f64, f64)]) -> Result<HeatingFit> {
    if points.len() < 2 {
        return Err(Error::Fit(format!(
            "heating fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let weighted = points.iter().any(|&(_, _, s)| s > 0.0);
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, s) in points {
        let w = if s > 0.0 { 1.0 / (s * s) } else { 1.0 };
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::Fit("singular heating fit: all delays coincide".into()));
    }
    let rate = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;

    let mut var_scale = 1.0;
    if !weighted {
        // unweighted fit: scale the covariance by the residual variance
        if points.len() > 2 {
            let chi2: f64 = points
                .iter()
                .map(|&(x, y, _)| {
                    let r = y - (intercept + rate * x);
                    r * r
                })
                .sum();
            var_scale = chi2 / (points.len() as f64 - 2.0);
        } else {
            var_scale = 0.0;
        }
    }
    Ok(HeatingFit {
        rate,
        rate_stderr: (var_scale * sw / det).sqrt(),
        intercept,
        intercept_stderr: (var_scale * sxx / det).sqrt(),
    })
}

/// Monte-Carlo round-trip statistics.
#[derive(Debug, Clone)]
pub struct RoundTripStats {
    pub repetitions: usize,
    /// Reconstructions that did not converge.
    pub failures: usize,
    /// Mean signed error per P_n (dictionary levels).
    pub bias_p: Vec<f64>,
    /// Root-mean-square error per P_n.
    pub rmse_p: Vec<f64>,
    pub bias_nbar: f64,
    pub rmse_nbar: f64,
    /// Signed n̄ error of every successful repetition.
    pub nbar_errors: Vec<f64>,
}

/// Generate traces from the forward model with the detection noise of the
/// sequence engine, reconstruct them, and aggregate the errors. `shots = 0`
/// runs the noiseless limit. Deterministic for a fixed seed.
#[allow(clippy::too_many_arguments)]
pub fn validate_round_trip(
    true_dist: &PhononDistribution,
    transition: &TransitionSpec,
    decoherence: &DecoherenceModel,
    times: &[f64],
    shots: u32,
    readout: &ReadoutModel,
    n_max: usize,
    repetitions: usize,
    seed: u64,
    opts: &DeconvolveOptions,
) -> Result<RoundTripStats> {
    if repetitions == 0 {
        return Err(Error::Domain("round trip needs at least one repetition".into()));
    }
    let ideal = flop_signal(true_dist, transition, decoherence, times);
    let lines =
        predict_line_positions(transition.base_rabi_frequency, transition.lamb_dicke, n_max);
    let n_levels = n_max + 1;

    let runs: Vec<Option<(Vec<f64>, f64)>> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let p_meas: Vec<f64> = if shots == 0 {
                ideal.clone()
            } else {
                ideal
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| {
                        let mut rng = derive_stream(seed, &[rep as u64, k as u64]);
                        detect(p, shots, readout, &mut rng)
                            .map(|d| d.estimate())
                            .unwrap_or(p)
                    })
                    .collect()
            };
            let trace = RabiTrace::new(times.to_vec(), p_meas, shots.max(1)).ok()?;
            let nested = DeconvolveOptions { bootstrap_resamples: 0, ..opts.clone() };
            let rec = deconvolve(&trace, &lines, decoherence.contrast, decoherence.decay_rate, &nested).ok()?;
            let mut probs = rec.distribution.probabilities().to_vec();
            probs.resize(n_levels, 0.0);
            Some((probs, rec.mean_phonon))
        })
        .collect();

    let true_mean = true_dist.mean();
    let mut true_p = true_dist.probabilities().to_vec();
    true_p.resize(n_levels, 0.0);

    let ok: Vec<&(Vec<f64>, f64)> = runs.iter().flatten().collect();
    let failures = repetitions - ok.len();
    if ok.is_empty() {
        return Err(Error::Fit("every round-trip repetition failed to reconstruct".into()));
    }
    let m = ok.len() as f64;
    let mut bias_p = vec![0.0; n_levels];
    let mut rmse_p = vec![0.0; n_levels];
    for (probs, _) in ok.iter() {
        for j in 0..n_levels {
            let e = probs[j] - true_p[j];
            bias_p[j] += e / m;
            rmse_p[j] += e * e / m;
        }
    }
    for r in rmse_p.iter_mut() {
        *r = r.sqrt();
    }
    let nbar_errors: Vec<f64> = ok.iter().map(|(_, nb)| nb - true_mean).collect();
    let bias_nbar = nbar_errors.iter().sum::<f64>() / m;
    let rmse_nbar = (nbar_errors.iter().map(|e| e * e).sum::<f64>() / m).sqrt();

    Ok(RoundTripStats {
        repetitions,
        failures,
        bias_p,
        rmse_p,
        bias_nbar,
        rmse_nbar,
        nbar_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{thermal_distribution, TransitionKind};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn bsb(omega0: f64, eta: f64) -> TransitionSpec {
        TransitionSpec {
            base_rabi_frequency: omega0,
            lamb_dicke: eta,
            kind: TransitionKind::BlueSideband,
            detuning: 0.0,
        }
    }

    fn uniform_times(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn trace_rejects_non_uniform_grid() {
        let mut times = uniform_times(10, 1e-6);
        times[7] += 3e-8;
        assert!(RabiTrace::new(times, vec![0.5; 10], 100).is_err());
        let backwards = vec![0.0, 2e-6, 1e-6];
        assert!(RabiTrace::new(backwards, vec![0.5; 3], 100).is_err());
    }

    #[test]
    fn cosine_transform_single_tone_peak() {
        let w0 = TAU * 20e3;
        let times = uniform_times(400, 1e-6);
        let p: Vec<f64> = times.iter().map(|&t| 0.5 + 0.3 * (w0 * t).cos()).collect();
        let trace = RabiTrace::new(times, p, 100).unwrap();
        let grid: Vec<f64> = (1..200).map(|k| TAU * 250.0 * k as f64).collect();
        let report = cosine_transform(&trace, &grid);
        let (imax, &peak) = report
            .magnitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((report.frequencies[imax] - w0).abs() <= TAU * 250.0);
        assert!((peak - 0.3).abs() < 0.02 * 0.3 + 0.01, "peak {peak}");
    }

    #[test]
    fn cosine_transform_constant_trace_is_flat() {
        let times = uniform_times(64, 1e-6);
        let trace = RabiTrace::new(times, vec![0.37; 64], 100).unwrap();
        let grid: Vec<f64> = (1..50).map(|k| TAU * 1e3 * k as f64).collect();
        let report = cosine_transform(&trace, &grid);
        assert!(report.magnitudes.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn cosine_transform_two_tone_resolves_root_two_spacing() {
        let omega0 = TAU * 100e3;
        let lines = predict_line_positions(omega0, 0.21, 1);
        let times = uniform_times(500, 2e-6);
        let p: Vec<f64> = times
            .iter()
            .map(|&t| 0.5 + 0.25 * (lines[0] * t).cos() + 0.15 * (lines[1] * t).cos())
            .collect();
        let trace = RabiTrace::new(times, p, 100).unwrap();
        let report = spectrum_with_lines(&trace, omega0, 0.21, 1).unwrap();
        for (j, &line) in report.predicted_lines.iter().enumerate() {
            let near = report
                .frequencies
                .iter()
                .zip(&report.magnitudes)
                .filter(|(f, _)| (**f - line).abs() < 0.05 * line)
                .map(|(_, m)| *m)
                .fold(0.0f64, f64::max);
            assert!(near > 0.1, "line {j} not resolved: {near}");
        }
        // the two lines sit at the sqrt(2)-like Laguerre-corrected spacing
        let ratio = report.predicted_lines[1] / report.predicted_lines[0];
        assert!((ratio - 2f64.sqrt()).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn cosine_transform_is_linear() {
        let times = uniform_times(100, 1e-6);
        let x: Vec<f64> = times.iter().map(|&t| 0.5 + 0.3 * (TAU * 30e3 * t).cos()).collect();
        let y: Vec<f64> = times.iter().map(|&t| 0.5 + 0.2 * (TAU * 55e3 * t).sin()).collect();
        let (a, b) = (0.6, 0.4);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xv, yv)| a * xv + b * yv).collect();
        let grid: Vec<f64> = (1..80).map(|k| TAU * 1e3 * k as f64).collect();
        let tx = cosine_transform(&RabiTrace::new(times.clone(), x, 1).unwrap(), &grid);
        let ty = cosine_transform(&RabiTrace::new(times.clone(), y, 1).unwrap(), &grid);
        let tc = cosine_transform(&RabiTrace::new(times, combo, 1).unwrap(), &grid);
        for k in 0..grid.len() {
            assert_relative_eq!(
                tc.magnitudes[k],
                a * tx.magnitudes[k] + b * ty.magnitudes[k],
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn line_positions_examples() {
        let small = predict_line_positions(1.0, 1e-5, 2);
        assert_relative_eq!(small[1] / small[0], 2f64.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(small[2] / small[0], 3f64.sqrt(), max_relative = 1e-6);
        let lines = predict_line_positions(TAU * 100e3, 0.21, 0);
        assert_eq!(lines.len(), 1);
        assert!((lines[0] / TAU - 20.5e3).abs() < 100.0, "{}", lines[0] / TAU);
    }

    #[test]
    fn line_positions_increase_up_to_the_turnover() {
        for eta in [0.06, 0.21, 0.3] {
            let lines = predict_line_positions(1.0, eta, 20);
            for w in lines.windows(2) {
                assert!(w[1] > w[0], "eta {eta}: {lines:?}");
            }
        }
    }

    fn synthetic_trace(
        dist: &PhononDistribution,
        omega0: f64,
        eta: f64,
        deco: &DecoherenceModel,
        n: usize,
        dt: f64,
    ) -> RabiTrace {
        let times = uniform_times(n, dt);
        let p = flop_signal(dist, &bsb(omega0, eta), deco, &times);
        RabiTrace::new(times, p, 100).unwrap()
    }

    #[test]
    fn deconvolve_recovers_noiseless_thermal_state() {
        let dist = thermal_distribution(0.24, 12).unwrap();
        let deco = DecoherenceModel { decay_rate: 1.0 / 280e-6, contrast: 0.96 };
        let omega0 = TAU * 100e3;
        let trace = synthetic_trace(&dist, omega0, 0.21, &deco, 220, 2e-6);
        let lines = predict_line_positions(omega0, 0.21, 10);
        // start the fit away from the truth
        let opts = DeconvolveOptions { bootstrap_resamples: 0, ..DeconvolveOptions::default() };
        let rec = deconvolve(&trace, &lines, 0.9, 1.0 / 200e-6, &opts).unwrap();
        for n in 0..=10 {
            let truth = dist.probabilities().get(n).copied().unwrap_or(0.0);
            let got = rec.distribution.probabilities().get(n).copied().unwrap_or(0.0);
            assert!((got - truth).abs() < 0.01, "P_{n}: {got} vs {truth}");
        }
        assert!((rec.mean_phonon - dist.mean()).abs() < 0.02);
        assert!((rec.contrast - 0.96).abs() < 0.02, "A = {}", rec.contrast);
        assert!(
            (rec.decay_rate - 1.0 / 280e-6).abs() / (1.0 / 280e-6) < 0.1,
            "gamma = {}",
            rec.decay_rate
        );
    }

    #[test]
    fn deconvolve_pure_ground_state() {
        let dist = PhononDistribution::pure(0, 6);
        let deco = DecoherenceModel { decay_rate: 1.0 / 280e-6, contrast: 0.96 };
        let omega0 = TAU * 100e3;
        let trace = synthetic_trace(&dist, omega0, 0.21, &deco, 200, 2e-6);
        let lines = predict_line_positions(omega0, 0.21, 5);
        let opts = DeconvolveOptions { bootstrap_resamples: 0, ..DeconvolveOptions::default() };
        let rec = deconvolve(&trace, &lines, 0.9, 1.0 / 200e-6, &opts).unwrap();
        assert!(rec.distribution.probabilities()[0] > 0.99);
    }

    #[test]
    fn deconvolve_output_is_a_valid_distribution_under_noise() {
        let dist = thermal_distribution(0.6, 14).unwrap();
        let deco = DecoherenceModel::default();
        let omega0 = TAU * 100e3;
        let clean = synthetic_trace(&dist, omega0, 0.21, &deco, 220, 2e-6);
        let mut rng = derive_stream(13, &[0]);
        let noisy: Vec<f64> = clean
            .p_down()
            .iter()
            .map(|&p| binomial(&mut rng, 100, p) as f64 / 100.0)
            .collect();
        let trace = RabiTrace::new(clean.times().to_vec(), noisy, 100).unwrap();
        let lines = predict_line_positions(omega0, 0.21, 10);
        let opts = DeconvolveOptions { bootstrap_resamples: 50, seed: 5, ..DeconvolveOptions::default() };
        let rec = deconvolve(&trace, &lines, 0.9, 1.0 / 200e-6, &opts).unwrap();
        let sum: f64 = rec.distribution.probabilities().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(rec.distribution.probabilities().iter().all(|&p| p >= 0.0));
        assert!(rec.contrast > 0.0 && rec.contrast <= 1.0);
        assert!(rec.decay_rate >= 0.0);
        assert_eq!(rec.p_sigma.len(), lines.len());
        assert!(rec.nbar_sigma.unwrap() > 0.0);
    }

    #[test]
    fn deconvolve_round_trip_identity_for_small_thermal_states() {
        let deco = DecoherenceModel { decay_rate: 1.0 / 280e-6, contrast: 0.96 };
        let omega0 = TAU * 100e3;
        let opts = DeconvolveOptions { bootstrap_resamples: 0, ..DeconvolveOptions::default() };
        for nbar in [0.1, 0.5, 1.0, 2.0] {
            // truncated thermal weights on a short ladder
            let ratio: f64 = nbar / (nbar + 1.0);
            let weights: Vec<f64> = (0..=10).map(|n| ratio.powi(n)).collect();
            let dist = PhononDistribution::from_weights(weights).unwrap();
            let trace = synthetic_trace(&dist, omega0, 0.21, &deco, 280, 2e-6);
            let lines = predict_line_positions(omega0, 0.21, 10);
            let rec = deconvolve(&trace, &lines, 0.9, 1.0 / 250e-6, &opts).unwrap();
            for n in 0..=10 {
                let diff =
                    (rec.distribution.probabilities()[n] - dist.probabilities()[n]).abs();
                assert!(diff < 0.01, "nbar {nbar}, P_{n} off by {diff}");
            }
        }
    }

    #[test]
    fn deconvolve_short_trace_is_rejected() {
        let dist = thermal_distribution(0.24, 12).unwrap();
        let deco = DecoherenceModel::default();
        let trace = synthetic_trace(&dist, TAU * 100e3, 0.21, &deco, 30, 2e-6);
        let lines = predict_line_positions(TAU * 100e3, 0.21, 10);
        assert!(deconvolve(&trace, &lines, 0.9, 1e3, &DeconvolveOptions::default()).is_err());
    }

    #[test]
    fn deconvolve_model_mismatch_surfaces_in_residual() {
        // hot state fitted with a tiny dictionary: the residual must betray it
        let dist = thermal_distribution(15.0, 200).unwrap();
        let deco = DecoherenceModel::default();
        let omega0 = TAU * 100e3;
        let trace = synthetic_trace(&dist, omega0, 0.21, &deco, 300, 1e-6);
        let opts = DeconvolveOptions { bootstrap_resamples: 0, ..DeconvolveOptions::default() };
        let small = predict_line_positions(omega0, 0.21, 5);
        let rec = deconvolve(&trace, &small, 0.96, 1.0 / 280e-6, &opts).unwrap();
        let per_point = rec.residual_norm / (trace.times().len() as f64).sqrt();
        assert!(per_point > 0.01, "mismatch hidden: residual/pt = {per_point}");
    }

    #[test]
    fn mean_phonon_examples() {
        let ground = PhononDistribution::ground(5);
        assert_eq!(mean_phonon(&ground).0, 0.0);
        let thermal = thermal_distribution(1.0, 100).unwrap();
        assert!((mean_phonon(&thermal).0 - 1.0).abs() < 1e-6);
        let p = PhononDistribution::from_probabilities(vec![0.8, 0.15, 0.05]).unwrap();
        assert_relative_eq!(mean_phonon(&p).0, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn heating_fit_two_point_line_is_exact() {
        let fit = heating_rate_fit(&[(0.0, 0.24, 0.0), (3e-3, 1.14, 0.0)]).unwrap();
        assert_relative_eq!(fit.rate, 300.0, epsilon = 1e-9);
        assert_relative_eq!(fit.intercept, 0.24, epsilon = 1e-12);
        assert_eq!(fit.rate_stderr, 0.0);
    }

    #[test]
    fn heating_fit_recovers_noisy_slope() {
        let mut rng = derive_stream(21, &[0]);
        use rand::Rng;
        let mut points = Vec::new();
        for &d in &[0.0, 1.5e-3, 3e-3, 6e-3] {
            // crude gaussian noise from 12 uniforms
            let g: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
            points.push((d, 0.24 + 300.0 * d + 0.05 * g, 0.05));
        }
        let fit = heating_rate_fit(&points).unwrap();
        assert!((fit.rate - 300.0).abs() < 100.0, "rate {}", fit.rate);
        assert!(fit.rate_stderr > 0.0);
    }

    #[test]
    fn heating_fit_errors() {
        assert!(heating_rate_fit(&[(1.0, 0.5, 0.0)]).is_err());
        assert!(heating_rate_fit(&[(1.0, 0.5, 0.0), (1.0, 0.7, 0.0)]).is_err());
    }

    #[test]
    fn heating_fit_delay_scaling_equivariance() {
        let points = [(0.0, 0.2, 0.04), (1e-3, 0.5, 0.06), (2e-3, 0.9, 0.05), (4e-3, 1.4, 0.08)];
        let fit = heating_rate_fit(&points).unwrap();
        let scaled: Vec<(f64, f64, f64)> =
            points.iter().map(|&(x, y, s)| (4.0 * x, y, s)).collect();
        let fit4 = heating_rate_fit(&scaled).unwrap();
        assert_eq!(fit4.rate, fit.rate / 4.0);
    }

    #[test]
    fn round_trip_noiseless_bias_is_negligible() {
        let dist = thermal_distribution(0.24, 12).unwrap();
        let deco = DecoherenceModel { decay_rate: 1.0 / 280e-6, contrast: 0.96 };
        let times = uniform_times(220, 2e-6);
        let stats = validate_round_trip(
            &dist,
            &bsb(TAU * 100e3, 0.21),
            &deco,
            &times,
            0,
            &ReadoutModel::default(),
            10,
            1,
            7,
            &DeconvolveOptions::default(),
        )
        .unwrap();
        assert_eq!(stats.failures, 0);
        assert!(stats.bias_p.iter().all(|b| b.abs() < 0.01), "{:?}", stats.bias_p);
        assert!(stats.bias_nbar.abs() < 0.02);
    }
}
