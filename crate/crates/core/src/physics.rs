//! Closed-form physics of the spin qubit: Lamb-Dicke factors, Raman Rabi
//! frequencies, scattering probabilities, AC-Stark shifts, sideband matrix
//! elements and thermal phonon distributions.
//!
//! All frequencies are angular (rad/s), all lengths are meters, all masses
//! kilograms. Conversions from `"1.35 MHz"`-style config values happen at the
//! I/O boundary, never here.

use crate::constants::{DIPOLE_LINEWIDTH, HBAR, SQRT_18};
use crate::error::{Error, Result};

/// Normalized top-state occupancy above which a truncated distribution is
/// considered to overflow its Fock cutoff.
pub const CUTOFF_OCCUPANCY_TOL: f64 = 1e-6;

/// Static trap parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    /// Axial mode frequency (rad/s).
    pub axial_frequency: f64,
    /// The two nondegenerate radial mode frequencies (rad/s).
    pub radial_frequencies: [f64; 2],
    /// RF drive frequency (rad/s).
    pub rf_drive_frequency: f64,
    /// Ion mass (kg).
    pub ion_mass: f64,
}

impl TrapConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.axial_frequency,
            self.radial_frequencies[0],
            self.radial_frequencies[1],
            self.rf_drive_frequency,
            self.ion_mass,
        ];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Domain(
                "trap frequencies and ion mass must be strictly positive".into(),
            ));
        }
        if self.radial_frequencies[0] == self.radial_frequencies[1] {
            return Err(Error::Domain(
                "radial mode frequencies must be nondegenerate".into(),
            ));
        }
        Ok(())
    }
}

impl Default for TrapConfig {
    /// 40Ca+ in the micro trap: axial 2π·1.35 MHz, radial 2π·{2.0, 3.5} MHz,
    /// RF drive 2π·24.8 MHz.
    fn default() -> Self {
        use std::f64::consts::TAU;
        TrapConfig {
            axial_frequency: TAU * 1.35e6,
            radial_frequencies: [TAU * 2.0e6, TAU * 3.5e6],
            rf_drive_frequency: TAU * 24.8e6,
            ion_mass: crate::constants::CA40_MASS,
        }
    }
}

/// Which physical beam a [`LaserBeamSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeamLabel {
    R1,
    R2,
    Cc,
    Q729,
    Doppler397,
    Quench854,
}

/// One laser beam: coupling strength, detuning and geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserBeamSpec {
    /// Resonant single-beam Rabi frequency Ω_i (rad/s).
    pub resonant_rabi_frequency: f64,
    /// Detuning Δ from the relevant resonance (rad/s, signed).
    pub detuning: f64,
    /// Wavelength (m).
    pub wavelength: f64,
    /// Angle between the propagation direction and the trap axis (rad).
    pub angle_to_trap_axis: f64,
    pub label: BeamLabel,
}

impl LaserBeamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::Domain("beam wavelength must be positive".into()));
        }
        if !(self.resonant_rabi_frequency >= 0.0) {
            return Err(Error::Domain(
                "resonant Rabi frequency must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// |k| = 2π/λ (1/m).
    pub fn wavevector(&self) -> f64 {
        std::f64::consts::TAU / self.wavelength
    }
}

/// Transition flavor on the spin ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    Carrier,
    RedSideband,
    BlueSideband,
}

impl TransitionKind {
    /// Fock index coupled to `n` by this transition, if it exists.
    /// The red sideband has no partner below the ground state.
    pub fn partner(&self, n: usize) -> Option<usize> {
        match self {
            TransitionKind::Carrier => Some(n),
            TransitionKind::BlueSideband => Some(n + 1),
            TransitionKind::RedSideband => n.checked_sub(1),
        }
    }
}

/// A concrete driven transition: base Rabi frequency plus motional coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSpec {
    /// Bare (n-independent) Rabi frequency Ω0 (rad/s).
    pub base_rabi_frequency: f64,
    /// Lamb-Dicke factor η of the driving field along the mode.
    pub lamb_dicke: f64,
    pub kind: TransitionKind,
    /// Detuning from the line center (rad/s); ignored by resonant models.
    pub detuning: f64,
}

impl TransitionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lamb_dicke >= 0.0 && self.lamb_dicke < 1.0) {
            return Err(Error::Domain(format!(
                "Lamb-Dicke factor {} outside [0, 1)",
                self.lamb_dicke
            )));
        }
        if !(self.base_rabi_frequency >= 0.0) {
            return Err(Error::Domain("base Rabi frequency must be non-negative".into()));
        }
        Ok(())
    }

    /// n-resolved Rabi frequency |Ω0 · ⟨n|..|partner⟩| for this transition,
    /// zero where no partner state exists.
    pub fn rabi_frequency(&self, n: usize) -> f64 {
        match self.kind.partner(n) {
            Some(m) => {
                self.base_rabi_frequency * sideband_matrix_element(n, m, self.lamb_dicke).abs()
            }
            None => 0.0,
        }
    }
}

/// Atomic constants entering the scattering figure of merit.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicConstants {
    /// Dipole transition linewidth Γ (rad/s).
    pub dipole_linewidth: f64,
    /// Clebsch-Gordan combination for the figure of merit; √18 for the
    /// 397 nm Raman configuration. Stated, not derived, in the source
    /// analysis, hence configurable.
    pub figure_factor: f64,
}

impl Default for AtomicConstants {
    fn default() -> Self {
        AtomicConstants {
            dipole_linewidth: DIPOLE_LINEWIDTH,
            figure_factor: SQRT_18,
        }
    }
}

/// Phonon number distribution over Fock states 0..=cutoff.
///
/// Invariants (enforced at construction): every entry in [0, 1], entries sum
/// to 1 within 1e-9, cutoff ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhononDistribution {
    probabilities: Vec<f64>,
}

impl PhononDistribution {
    /// Build from probabilities that must already sum to 1 within 1e-9.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() < 2 {
            return Err(Error::Domain("phonon cutoff must be at least 1".into()));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
            return Err(Error::Domain(
                "phonon probabilities must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "phonon probabilities sum to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(PhononDistribution { probabilities })
    }

    /// Build from non-negative weights, renormalizing to unit sum.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Domain("phonon cutoff must be at least 1".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Domain("phonon weights must be non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::Domain("phonon weights sum to zero".into()));
        }
        let probabilities = weights.into_iter().map(|w| w / sum).collect();
        Ok(PhononDistribution { probabilities })
    }

    /// |0⟩⟨0| on a ladder with the given cutoff.
    pub fn ground(cutoff: usize) -> Self {
        Self::pure(0, cutoff)
    }

    /// Point distribution at Fock state n.
    ///
    /// Panics if n > cutoff or cutoff < 1.
    pub fn pure(n: usize, cutoff: usize) -> Self {
        assert!(cutoff >= 1 && n <= cutoff);
        let mut probabilities = vec![0.0; cutoff + 1];
        probabilities[n] = 1.0;
        PhononDistribution { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Highest Fock index carried by the distribution.
    pub fn cutoff(&self) -> usize {
        self.probabilities.len() - 1
    }

    /// Mean phonon number Σ n·P_n over the truncated support.
    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Occupancy of the top state, the overflow indicator.
    pub fn top_state_occupancy(&self) -> f64 {
        *self.probabilities.last().unwrap()
    }
}

/// Lamb-Dicke factor η = k_eff · √(ħ / (2 m ω)).
///
/// `k_eff` is the effective wavevector projection on the mode axis (1/m) and
/// may be zero (copropagating Raman pairs); mode frequency and mass must be
/// strictly positive.
pub fn lamb_dicke_factor(k_eff: f64, mode_frequency: f64, ion_mass: f64) -> Result<f64> {
    if !(k_eff >= 0.0) {
        return Err(Error::Domain(format!(
            "effective wavevector {k_eff} must be non-negative"
        )));
    }
    if !(mode_frequency > 0.0) || !(ion_mass > 0.0) {
        return Err(Error::Domain(
            "mode frequency and ion mass must be strictly positive".into(),
        ));
    }
    Ok(k_eff * (HBAR / (2.0 * ion_mass * mode_frequency)).sqrt())
}

/// Effective wavevector projection on the trap axis (1/m).
///
/// A single beam contributes |k|·cos(angle); a pair contributes the axial
/// component of the difference k-vector, |k_a cos θ_a − k_b cos θ_b|. For an
/// orthogonal pair this equals √2|k| times the cosine of the beat tilt
/// against the axis; for copropagating equal-wavelength beams it vanishes.
pub fn effective_wavevector(beam_a: &LaserBeamSpec, beam_b: Option<&LaserBeamSpec>) -> f64 {
    let axial_a = beam_a.wavevector() * beam_a.angle_to_trap_axis.cos();
    match beam_b {
        None => axial_a.abs(),
        Some(b) => {
            let axial_b = b.wavevector() * b.angle_to_trap_axis.cos();
            (axial_a - axial_b).abs()
        }
    }
}

/// Two-photon Raman Rabi frequency |Ω1 Ω2 / (2Δ)| (rad/s).
pub fn raman_rabi_frequency(omega1: f64, omega2: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::Domain(
            "Raman detuning must be nonzero (adiabatic elimination invalid at Δ = 0)".into(),
        ));
    }
    Ok((omega1 * omega2 / (2.0 * delta)).abs())
}

/// Off-resonant excited-state population p = Ω²/(2Δ²) for one beam.
/// The photon scattering rate is Γ times this value.
pub fn scattering_probability(omega: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::Domain("scattering probability undefined at Δ = 0".into()));
    }
    Ok(omega * omega / (2.0 * delta * delta))
}

/// Number of Rabi cycles per spontaneous scattering event,
/// figure_factor · |Δ| / Γ.
pub fn rabi_per_scatter_figure_of_merit(delta: f64, constants: &AtomicConstants) -> f64 {
    debug_assert!(constants.dipole_linewidth > 0.0);
    constants.figure_factor * delta.abs() / constants.dipole_linewidth
}

/// AC-Stark shift Δ_S = Ω²/(4Δ) (rad/s, sign follows Δ).
pub fn ac_stark_shift(omega: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::Domain("AC-Stark shift undefined at Δ = 0".into()));
    }
    Ok(omega * omega / (4.0 * delta))
}

/// Thermal distribution P_n = n̄ⁿ/(n̄+1)ⁿ⁺¹, renormalized over [0, cutoff].
///
/// Refuses cutoffs whose normalized top-state occupancy exceeds
/// [`CUTOFF_OCCUPANCY_TOL`]; the error names the minimum acceptable cutoff.
pub fn thermal_distribution(nbar: f64, cutoff: usize) -> Result<PhononDistribution> {
    if !(nbar >= 0.0) {
        return Err(Error::Domain(format!("mean phonon number {nbar} must be non-negative")));
    }
    if cutoff < 1 {
        return Err(Error::Domain("phonon cutoff must be at least 1".into()));
    }
    if nbar == 0.0 {
        return Ok(PhononDistribution::ground(cutoff));
    }
    let ratio = nbar / (nbar + 1.0);
    let top = ratio.powi(cutoff as i32) / (nbar + 1.0);
    if top > CUTOFF_OCCUPANCY_TOL {
        let min_cutoff = ((CUTOFF_OCCUPANCY_TOL * (nbar + 1.0)).ln() / ratio.ln()).ceil() as usize;
        return Err(Error::Domain(format!(
            "cutoff {cutoff} too small for nbar = {nbar}: top-state occupancy {top:.3e} \
             exceeds {CUTOFF_OCCUPANCY_TOL:.0e}; use cutoff >= {min_cutoff}"
        )));
    }
    let weights: Vec<f64> = (0..=cutoff)
        .map(|n| ratio.powi(n as i32) / (nbar + 1.0))
        .collect();
    PhononDistribution::from_weights(weights)
}

/// Full sideband coupling matrix element ratio Ω_{n,m}/Ω0,
///
///   e^{−η²/2} η^{|n−m|} √(n_<!/n_>!) L_{n_<}^{|n−m|}(η²),
///
/// with L the associated Laguerre polynomial. Reduces to η√(n+1) on the blue
/// sideband and to 1 on the carrier as η → 0. The returned value is signed
/// (Laguerre nodes); spectral users take the magnitude.
pub fn sideband_matrix_element(n: usize, m: usize, eta: f64) -> f64 {
    debug_assert!(eta >= 0.0);
    let lo = n.min(m);
    let hi = n.max(m);
    let diff = hi - lo;
    let x = eta * eta;
    // Factorial ratio in log space so n up to a few hundred stays finite.
    let root_ratio = (0.5 * (ln_factorial(lo) - ln_factorial(hi))).exp();
    let eta_pow = if diff == 0 { 1.0 } else { eta.powi(diff as i32) };
    (-0.5 * x).exp() * eta_pow * root_ratio * associated_laguerre(lo, diff as f64, x)
}

/// Two-level Rabi transfer probability
/// Ω²/(Ω²+δ²) · sin²(√(Ω²+δ²)·t/2) for a square resonant or detuned pulse.
pub fn generalized_rabi_transfer(omega: f64, detuning: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let w2 = omega * omega + detuning * detuning;
    if w2 == 0.0 {
        return 0.0;
    }
    let s = (0.5 * w2.sqrt() * t).sin();
    (omega * omega / w2) * s * s
}

/// ln(n!) by direct summation; exact enough for n ≲ 10⁴.
fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Associated Laguerre polynomial L_k^α(x) by the stable three-term
/// recurrence L_{j+1} = ((2j+1+α−x)L_j − (j+α)L_{j−1})/(j+1).
fn associated_laguerre(k: usize, alpha: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut curr = 1.0 + alpha - x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * curr - (jf + alpha) * prev) / (jf + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CA40_MASS;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn beam(label: BeamLabel, wavelength: f64, angle_deg: f64) -> LaserBeamSpec {
        LaserBeamSpec {
            resonant_rabi_frequency: TAU * 10e6,
            detuning: TAU * 40e9,
            wavelength,
            angle_to_trap_axis: angle_deg. to_radians(),
            label,
        }
    }

    #[test]
    fn lamb_dicke_729_axial_matches_apparatus() {
        let k = (TAU / 729e-9) * 45f64.to_radians().cos();
        let eta = lamb_dicke_factor(k, TAU * 1.35e6, CA40_MASS).unwrap();
        assert!((eta - 0.06).abs() <= 0.002, "eta = {eta}");
    }

    #[test]
    fn lamb_dicke_raman_geometry_matches_apparatus() {
        let r1 = beam(BeamLabel::R1, 397e-9, 60.0);
        let r2 = beam(BeamLabel::R2, 397e-9, 150.0);
        let k = effective_wavevector(&r1, Some(&r2));
        // orthogonal pair: √2|k| times the beat axis projection
        let proj = k / (2f64.sqrt() * r1.wavevector());
        assert_relative_eq!(proj, 15f64.to_radians().cos(), epsilon = 1e-12);
        let eta = lamb_dicke_factor(k, TAU * 1.35e6, CA40_MASS).unwrap();
        assert!((eta - 0.21).abs() <= 0.005, "eta = {eta}");
    }

    #[test]
    fn lamb_dicke_zero_wavevector_is_zero() {
        assert_eq!(lamb_dicke_factor(0.0, TAU * 1.35e6, CA40_MASS).unwrap(), 0.0);
    }

    #[test]
    fn lamb_dicke_rejects_nonpositive_inputs() {
        assert!(lamb_dicke_factor(1e6, 0.0, CA40_MASS).is_err());
        assert!(lamb_dicke_factor(1e6, TAU * 1e6, -1.0).is_err());
        assert!(lamb_dicke_factor(-1.0, TAU * 1e6, CA40_MASS).is_err());
    }

    #[test]
    fn lamb_dicke_scales_as_inverse_root_frequency() {
        let k = TAU / 729e-9;
        let w = TAU * 1.35e6;
        let quad = lamb_dicke_factor(k, 4.0 * w, CA40_MASS).unwrap();
        let base = lamb_dicke_factor(k, w, CA40_MASS).unwrap();
        assert_eq!(quad, base / 2.0);
    }

    #[test]
    fn effective_wavevector_copropagating_pair_vanishes() {
        let r1 = beam(BeamLabel::R1, 397e-9, 60.0);
        let cc = beam(BeamLabel::Cc, 397e-9, 60.0);
        assert_eq!(effective_wavevector(&r1, Some(&cc)), 0.0);
        assert_eq!(effective_wavevector(&r1, Some(&r1)), 0.0);
    }

    #[test]
    fn effective_wavevector_single_729_at_45_degrees() {
        let q = beam(BeamLabel::Q729, 729e-9, 45.0);
        let k = effective_wavevector(&q, None);
        assert_relative_eq!(k, (TAU / 729e-9) * 45f64.to_radians().cos(), epsilon = 1.0);
        assert!((k - 6.09e6).abs() < 0.01e6);
    }

    #[test]
    fn raman_rabi_frequency_examples() {
        let w = raman_rabi_frequency(TAU * 10e6, TAU * 10e6, TAU * 1e9).unwrap();
        assert_relative_eq!(w, TAU * 50e3, max_relative = 1e-12);
        assert_eq!(raman_rabi_frequency(0.0, TAU * 10e6, TAU * 1e9).unwrap(), 0.0);
        let half = raman_rabi_frequency(TAU * 1e6, TAU * 1e6, TAU * 2e9).unwrap();
        let full = raman_rabi_frequency(TAU * 1e6, TAU * 1e6, TAU * 1e9).unwrap();
        assert_relative_eq!(full / half, 2.0, max_relative = 1e-12);
        assert!(raman_rabi_frequency(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn scattering_probability_examples() {
        assert_relative_eq!(scattering_probability(1.0, 1.0).unwrap(), 0.5);
        let p = scattering_probability(TAU * 10e6, TAU * 40e9).unwrap();
        assert_relative_eq!(p, 3.125e-8, max_relative = 1e-12);
        assert_eq!(scattering_probability(0.0, 1.0).unwrap(), 0.0);
        assert!(scattering_probability(1.0, 0.0).is_err());
    }

    #[test]
    fn figure_of_merit_examples() {
        let c = AtomicConstants::default();
        let fom = rabi_per_scatter_figure_of_merit(TAU * 40e9, &c);
        assert_relative_eq!(fom, 18f64.sqrt() * 40e9 / 22e6, max_relative = 1e-12);
        assert!((fom - 7713.9).abs() < 0.1);
        let unity = AtomicConstants { dipole_linewidth: 1.0, figure_factor: 1.0 };
        assert_relative_eq!(rabi_per_scatter_figure_of_merit(1.0, &unity), 1.0);
        assert_relative_eq!(
            rabi_per_scatter_figure_of_merit(TAU * 80e9, &c),
            2.0 * fom,
            max_relative = 1e-12
        );
    }

    #[test]
    fn raman_rabi_over_geometric_mean_scatter_is_delta_over_gamma() {
        let gamma = DIPOLE_LINEWIDTH;
        let cases = [
            (TAU * 10e6, TAU * 30e6, TAU * 40e9),
            (TAU * 90e6, TAU * 85e6, -TAU * 12e9),
            (TAU * 1e6, TAU * 2e6, TAU * 97e9),
        ];
        for (w1, w2, d) in cases {
            let rr = raman_rabi_frequency(w1, w2, d).unwrap();
            let r1 = gamma * scattering_probability(w1, d).unwrap();
            let r2 = gamma * scattering_probability(w2, d).unwrap();
            assert_relative_eq!(rr / (r1 * r2).sqrt(), d.abs() / gamma, max_relative = 1e-12);
        }
    }

    #[test]
    fn ac_stark_shift_examples() {
        let d = TAU * 40e9;
        assert_relative_eq!(ac_stark_shift(2.0 * d, d).unwrap(), d, max_relative = 1e-12);
        assert_eq!(ac_stark_shift(0.0, d).unwrap(), 0.0);
        assert!(ac_stark_shift(1.0, -d).unwrap() < 0.0);
        assert!(ac_stark_shift(1.0, 0.0).is_err());
    }

    #[test]
    fn thermal_distribution_ground_state() {
        let d = thermal_distribution(0.0, 5).unwrap();
        assert_eq!(d.probabilities()[0], 1.0);
        assert!(d.probabilities()[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn thermal_distribution_nbar_one_is_geometric() {
        let d = thermal_distribution(1.0, 60).unwrap();
        for n in 0..10 {
            assert_relative_eq!(
                d.probabilities()[n],
                0.5f64.powi(n as i32 + 1),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn thermal_distribution_doppler_mean() {
        // independent summation oracle for the mean
        let nbar = 15.0;
        let cutoff = 200;
        let d = thermal_distribution(nbar, cutoff).unwrap();
        let mut oracle_mean = 0.0;
        let mut oracle_norm = 0.0;
        for n in 0..=cutoff {
            let p = nbar.powi(n as i32) / (nbar + 1.0).powi(n as i32 + 1);
            oracle_mean += n as f64 * p;
            oracle_norm += p;
        }
        oracle_mean /= oracle_norm;
        assert_relative_eq!(d.mean(), oracle_mean, max_relative = 1e-12);
        assert!((d.mean() - 15.0).abs() < 0.01);
        // at generous cutoffs the truncated mean matches nbar to 1e-4
        let wide = thermal_distribution(nbar, 400).unwrap();
        assert!((wide.mean() - nbar).abs() < 1e-4);
    }

    #[test]
    fn thermal_distribution_refuses_small_cutoff_naming_minimum() {
        let err = thermal_distribution(15.0, 60).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("use cutoff >= "), "{msg}");
        let min: usize = msg.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(thermal_distribution(15.0, min).is_ok());
        assert!(thermal_distribution(15.0, min - 1).is_err());
        assert!(thermal_distribution(-0.1, 60).is_err());
    }

    #[test]
    fn thermal_distribution_normalized_and_nonnegative() {
        for k in 0..40 {
            let nbar = 50.0 * (k as f64 + 0.5) / 40.0;
            let cutoff = 600;
            let d = thermal_distribution(nbar, cutoff).unwrap();
            let sum: f64 = d.probabilities().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(d.probabilities().iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn sideband_matrix_element_examples() {
        let v = sideband_matrix_element(0, 1, 0.21);
        assert_relative_eq!(v, (-0.5 * 0.0441f64).exp() * 0.21, max_relative = 1e-12);
        assert!((v - 0.2054).abs() < 2e-4);
        assert_eq!(sideband_matrix_element(3, 3, 0.0), 1.0);
        let ratio = sideband_matrix_element(1, 2, 1e-6) / sideband_matrix_element(0, 1, 1e-6);
        assert_relative_eq!(ratio, 2f64.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn sideband_matrix_element_is_symmetric() {
        for n in 0..=30 {
            for m in 0..=30 {
                for eta in [0.06, 0.21, 0.5] {
                    assert_eq!(
                        sideband_matrix_element(n, m, eta),
                        sideband_matrix_element(m, n, eta)
                    );
                }
            }
        }
    }

    #[test]
    fn sideband_matrix_element_lamb_dicke_limit() {
        for n in 0..=20 {
            for eta in [1e-3, 5e-3, 1e-2] {
                let v = sideband_matrix_element(n, n + 1, eta);
                let limit = eta * ((n + 1) as f64).sqrt();
                assert!(
                    (v / limit - 1.0).abs() < 1e-3,
                    "n = {n}, eta = {eta}: {v} vs {limit}"
                );
            }
        }
    }

    #[test]
    fn sideband_matrix_element_large_n_stays_finite() {
        let v = sideband_matrix_element(500, 501, 0.06);
        assert!(v.is_finite());
    }

    #[test]
    fn generalized_rabi_transfer_examples() {
        let w = TAU * 50e3;
        assert_relative_eq!(
            generalized_rabi_transfer(w, 0.0, std::f64::consts::PI / w),
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(generalized_rabi_transfer(0.0, 1.0, 1.0), 0.0);
        // off-resonant envelope bound, the pumping-fidelity workhorse
        let bound = w * w / (w * w + (TAU * 8e6).powi(2));
        assert!(bound <= 3.91e-5);
        for k in 0..200 {
            let t = 1e-7 * k as f64;
            let p = generalized_rabi_transfer(w, TAU * 8e6, t);
            assert!(p <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn generalized_rabi_transfer_bounded_and_periodic() {
        let cases = [(TAU * 50e3, TAU * 20e3), (TAU * 1e6, 0.0), (0.0, TAU * 1e6)];
        for (w, d) in cases {
            let w_eff = (w * w + d * d).sqrt();
            for k in 0..100 {
                let t = 1e-6 * k as f64;
                let p = generalized_rabi_transfer(w, d, t);
                assert!((0.0..=1.0).contains(&p));
                if w_eff > 0.0 {
                    let p2 = generalized_rabi_transfer(w, d, t + TAU / w_eff);
                    assert!((p - p2).abs() < 1e-9);
                }
            }
        }
    }
}
