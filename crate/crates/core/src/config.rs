//! Experiment configuration: a sectioned TOML file with unit-suffixed values,
//! strict unknown-key rejection and a content digest recorded in every output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::constants::{ATOMIC_MASS, DIPOLE_LINEWIDTH, SQRT_18};
use crate::dynamics::{DecoherenceModel, RapParams, ReadoutPulseParams, ReadoutScheme};
use crate::error::{Error, Result};
use crate::physics::{
    effective_wavevector, lamb_dicke_factor, raman_rabi_frequency, AtomicConstants, BeamLabel,
    LaserBeamSpec, TransitionKind, TransitionSpec, TrapConfig,
};
use crate::sequence::{
    CoolingSchedule, CoolingStage, HeatingModel, PumpConfig, PumpScheme, ReadoutModel,
    RepumpStyle, ScanAxisKind, ScanSpec, SequencePlan, ShelvingChoice,
};
use crate::units::{parse_duration, parse_frequency, parse_rate};

/// Frequency field parsed from a `"1.35 MHz"` string into angular rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Freq(pub f64);

impl<'de> Deserialize<'de> for Freq {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_frequency(&s).map(Freq).map_err(serde::de::Error::custom)
    }
}

/// Duration field parsed from a `"10 us"` string into seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dur(pub f64);

impl<'de> Deserialize<'de> for Dur {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_duration(&s).map(Dur).map_err(serde::de::Error::custom)
    }
}

/// Rate field parsed from a `"0.3 /ms"` string into 1/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate(pub f64);

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_rate(&s).map(Rate).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrapSection {
    axial_frequency: Freq,
    radial_frequencies: [Freq; 2],
    rf_drive_frequency: Freq,
    ion_mass_amu: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        TrapSection {
            axial_frequency: Freq(TrapConfig::default().axial_frequency),
            radial_frequencies: [
                Freq(TrapConfig::default().radial_frequencies[0]),
                Freq(TrapConfig::default().radial_frequencies[1]),
            ],
            rf_drive_frequency: Freq(TrapConfig::default().rf_drive_frequency),
            ion_mass_amu: 40.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamSection {
    rabi_frequency: Freq,
    detuning: Freq,
    wavelength_nm: f64,
    angle_to_axis_deg: f64,
}

impl BeamSection {
    fn to_spec(&self, label: BeamLabel) -> LaserBeamSpec {
        LaserBeamSpec {
            resonant_rabi_frequency: self.rabi_frequency.0,
            detuning: self.detuning.0,
            wavelength: self.wavelength_nm * 1e-9,
            angle_to_trap_axis: self.angle_to_axis_deg.to_radians(),
            label,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamsSection {
    r1: Option<BeamSection>,
    r2: Option<BeamSection>,
    cc: Option<BeamSection>,
    q729: Option<BeamSection>,
    doppler397: Option<BeamSection>,
    quench854: Option<BeamSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoolingStageSection {
    rsb_pulse: Dur,
    quench: Dur,
    cycles: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoolingSection {
    #[serde(default = "default_true")]
    enabled: bool,
    #[serde(default = "default_doppler_nbar")]
    doppler_nbar: f64,
    #[serde(default = "default_fock_cutoff")]
    fock_cutoff: usize,
    /// Base Rabi frequency of the cooling transition; defaults to the q729
    /// beam's value.
    rsb_rabi_frequency: Option<Freq>,
    #[serde(default = "default_cycles_per_repump")]
    cycles_per_repump: u32,
    #[serde(default = "default_repump")]
    repump: String,
    wrong_spin_branching: Option<f64>,
    #[serde(default = "default_true")]
    carrier_reheating: bool,
    #[serde(default, rename = "stage")]
    stages: Vec<CoolingStageSection>,
}

fn default_true() -> bool {
    true
}
fn default_doppler_nbar() -> f64 {
    15.0
}
fn default_fock_cutoff() -> usize {
    220
}
fn default_cycles_per_repump() -> u32 {
    10
}
fn default_repump() -> String {
    "pump_729".into()
}

impl Default for CoolingSection {
    fn default() -> Self {
        CoolingSection {
            enabled: true,
            doppler_nbar: default_doppler_nbar(),
            fock_cutoff: default_fock_cutoff(),
            rsb_rabi_frequency: None,
            cycles_per_repump: default_cycles_per_repump(),
            repump: default_repump(),
            wrong_spin_branching: None,
            carrier_reheating: true,
            stages: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PumpSection {
    #[serde(default = "default_pump_scheme")]
    scheme: String,
    #[serde(default = "default_n_pulses")]
    n_pulses: u32,
    #[serde(default = "default_pulse_729")]
    pulse_729: Dur,
    #[serde(default = "default_quench")]
    quench: Dur,
    #[serde(default = "default_parasitic")]
    parasitic_splitting: Freq,
    #[serde(default = "default_pump_rabi")]
    rabi_frequency: Freq,
}

fn default_pump_scheme() -> String {
    "pulsed".into()
}
fn default_n_pulses() -> u32 {
    3
}
fn default_pulse_729() -> Dur {
    Dur(10e-6)
}
fn default_quench() -> Dur {
    Dur(2e-6)
}
fn default_parasitic() -> Freq {
    Freq(std::f64::consts::TAU * 8e6)
}
fn default_pump_rabi() -> Freq {
    Freq(std::f64::consts::TAU * 50e3)
}

impl Default for PumpSection {
    fn default() -> Self {
        PumpSection {
            scheme: default_pump_scheme(),
            n_pulses: default_n_pulses(),
            pulse_729: default_pulse_729(),
            quench: default_quench(),
            parasitic_splitting: default_parasitic(),
            rabi_frequency: default_pump_rabi(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReadoutSection {
    #[serde(default = "default_bright")]
    bright_mean: f64,
    #[serde(default = "default_dark")]
    dark_mean: f64,
    #[serde(default = "default_window")]
    window: Dur,
    threshold: Option<u32>,
    #[serde(default = "default_contrast")]
    contrast: f64,
    /// "gaussian_pi" | "single_rap" | "double_rap", or omitted with
    /// `shelving_efficiency` set.
    shelving: Option<String>,
    shelving_efficiency: Option<f64>,
    #[serde(default = "default_rap_peak")]
    rap_peak: Freq,
    #[serde(default = "default_rap_half_sweep")]
    rap_half_sweep: Freq,
    #[serde(default = "default_rap_duration")]
    rap_duration: Dur,
    #[serde(default = "default_gaussian_pi")]
    gaussian_pi_duration: Dur,
}

fn default_bright() -> f64 {
    55.0
}
fn default_dark() -> f64 {
    5.0
}
fn default_window() -> Dur {
    Dur(3e-3)
}
fn default_contrast() -> f64 {
    0.96
}
fn default_rap_peak() -> Freq {
    Freq(std::f64::consts::TAU * 150e3)
}
fn default_rap_half_sweep() -> Freq {
    Freq(std::f64::consts::TAU * 300e3)
}
fn default_rap_duration() -> Dur {
    Dur(200e-6)
}
fn default_gaussian_pi() -> Dur {
    Dur(10e-6)
}

impl Default for ReadoutSection {
    fn default() -> Self {
        ReadoutSection {
            bright_mean: default_bright(),
            dark_mean: default_dark(),
            window: default_window(),
            threshold: None,
            contrast: default_contrast(),
            shelving: Some("double_rap".into()),
            shelving_efficiency: None,
            rap_peak: default_rap_peak(),
            rap_half_sweep: default_rap_half_sweep(),
            rap_duration: default_rap_duration(),
            gaussian_pi_duration: default_gaussian_pi(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanSection {
    kind: String,
    #[serde(default = "default_transition")]
    transition: String,
    #[serde(default = "default_beam_pair")]
    beams: String,
    start: String,
    stop: String,
    points: usize,
    #[serde(default = "default_shots")]
    shots: u32,
    #[serde(default)]
    delays: Vec<Dur>,
    probe_duration: Option<Dur>,
}

fn default_transition() -> String {
    "bsb".into()
}
fn default_beam_pair() -> String {
    "r1_r2".into()
}
fn default_shots() -> u32 {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    #[serde(default = "default_heating")]
    heating_rate: Rate,
    #[serde(default = "default_coherence")]
    coherence_time: Dur,
}

fn default_heating() -> Rate {
    Rate(300.0)
}
fn default_coherence() -> Dur {
    Dur(280e-6)
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { heating_rate: default_heating(), coherence_time: default_coherence() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedSection {
    master: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    trap: TrapSection,
    #[serde(default)]
    beams: BeamsSection,
    #[serde(default)]
    cooling: CoolingSection,
    #[serde(default)]
    pumping: PumpSection,
    #[serde(default)]
    readout: ReadoutSection,
    scan: ScanSection,
    #[serde(default)]
    noise: NoiseSection,
    seed: SeedSection,
}

/// Default beam table of the apparatus. The Raman beams R1/CC copropagate at
/// 60° to the trap axis; R2 runs at 150°, orthogonal to R1, which leaves the
/// beat k-vector 15° off the axis and reproduces the deduced Lamb-Dicke
/// factor of 0.21 at the 1.35 MHz axial mode.
fn default_beam(label: BeamLabel) -> LaserBeamSpec {
    use std::f64::consts::TAU;
    let (rabi, detuning, wavelength_nm, angle_deg) = match label {
        BeamLabel::R1 => (TAU * 90e6, TAU * 40e9, 397.0, 60.0),
        BeamLabel::R2 => (TAU * 90e6, TAU * 40e9, 397.0, 150.0),
        BeamLabel::Cc => (TAU * 90e6, TAU * 40e9, 397.0, 60.0),
        BeamLabel::Q729 => (TAU * 800e3, 0.0, 729.0, 45.0),
        BeamLabel::Doppler397 => (TAU * 20e6, -TAU * 11e6, 397.0, 60.0),
        BeamLabel::Quench854 => (TAU * 5e6, 0.0, 854.0, 60.0),
    };
    LaserBeamSpec {
        resonant_rabi_frequency: rabi,
        detuning,
        wavelength: wavelength_nm * 1e-9,
        angle_to_trap_axis: (angle_deg as f64).to_radians(),
        label,
    }
}

/// Parsed, validated experiment configuration.
#[derive(Debug, Clone)]
pub struct SequenceConfig {
    pub trap: TrapConfig,
    pub beams: BTreeMap<&'static str, LaserBeamSpec>,
    file: ConfigFile,
    digest: String,
}

impl SequenceConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        Self::from_str_named(&raw, &path.display().to_string())
    }

    pub fn from_toml(raw: &str) -> Result<Self> {
        Self::from_str_named(raw, "<inline>")
    }

    fn from_str_named(raw: &str, name: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(raw)
            .map_err(|e| Error::Config(format!("{name}: {e}")))?;
        let digest = {
            let mut h = Sha256::new();
            h.update(raw.as_bytes());
            let out = h.finalize();
            out.iter().map(|b| format!("{b:02x}")).collect::<String>()
        };

        let trap = TrapConfig {
            axial_frequency: file.trap.axial_frequency.0,
            radial_frequencies: [
                file.trap.radial_frequencies[0].0,
                file.trap.radial_frequencies[1].0,
            ],
            rf_drive_frequency: file.trap.rf_drive_frequency.0,
            ion_mass: file.trap.ion_mass_amu * ATOMIC_MASS,
        };
        trap.validate()?;

        let mut beams = BTreeMap::new();
        let entries: [(&'static str, BeamLabel, &Option<BeamSection>); 6] = [
            ("r1", BeamLabel::R1, &file.beams.r1),
            ("r2", BeamLabel::R2, &file.beams.r2),
            ("cc", BeamLabel::Cc, &file.beams.cc),
            ("q729", BeamLabel::Q729, &file.beams.q729),
            ("doppler397", BeamLabel::Doppler397, &file.beams.doppler397),
            ("quench854", BeamLabel::Quench854, &file.beams.quench854),
        ];
        for (name, label, section) in entries {
            let spec = match section {
                Some(s) => s.to_spec(label),
                None => default_beam(label),
            };
            spec.validate()?;
            beams.insert(name, spec);
        }

        let config = SequenceConfig { trap, beams, file, digest };
        config.validate_scan()?;
        Ok(config)
    }

    /// SHA-256 of the raw file content.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn seed(&self) -> u64 {
        self.file.seed.master
    }

    pub fn heating(&self) -> HeatingModel {
        HeatingModel { rate: self.file.noise.heating_rate.0 }
    }

    pub fn decoherence(&self) -> DecoherenceModel {
        DecoherenceModel {
            decay_rate: 1.0 / self.file.noise.coherence_time.0,
            contrast: self.file.readout.contrast,
        }
    }

    pub fn atomic_constants(&self) -> AtomicConstants {
        AtomicConstants { dipole_linewidth: DIPOLE_LINEWIDTH, figure_factor: SQRT_18 }
    }

    pub fn pump_config(&self) -> Result<PumpConfig> {
        let scheme = match self.file.pumping.scheme.as_str() {
            "pulsed" => PumpScheme::Pulsed,
            "cw" => PumpScheme::Cw,
            other => {
                return Err(Error::Config(format!(
                    "[pumping] unknown scheme '{other}' (expected pulsed or cw)"
                )))
            }
        };
        Ok(PumpConfig {
            scheme,
            n_pulses: self.file.pumping.n_pulses,
            pulse_729_duration: self.file.pumping.pulse_729.0,
            quench_duration: self.file.pumping.quench.0,
            parasitic_splitting: self.file.pumping.parasitic_splitting.0,
            pump_rabi_frequency: self.file.pumping.rabi_frequency.0,
            ..PumpConfig::default()
        })
    }

    pub fn readout_pulse_params(&self) -> Result<ReadoutPulseParams> {
        let q729 = &self.beams["q729"];
        let k = effective_wavevector(q729, None);
        let eta = lamb_dicke_factor(k, self.trap.axial_frequency, self.trap.ion_mass)?;
        Ok(ReadoutPulseParams {
            lamb_dicke: eta,
            rap: RapParams {
                peak_rabi_frequency: self.file.readout.rap_peak.0,
                sweep_half_width: self.file.readout.rap_half_sweep.0,
                duration: self.file.readout.rap_duration.0,
            },
            gaussian_pi_duration: self.file.readout.gaussian_pi_duration.0,
        })
    }

    fn shelving_choice(&self) -> Result<ShelvingChoice> {
        if let Some(eff) = self.file.readout.shelving_efficiency {
            if !(0.0..=1.0).contains(&eff) {
                return Err(Error::Config(
                    "[readout] shelving_efficiency must lie in [0, 1]".into(),
                ));
            }
            return Ok(ShelvingChoice::Fixed(eff));
        }
        let scheme = match self.file.readout.shelving.as_deref() {
            None | Some("double_rap") => ReadoutScheme::DoubleRap,
            Some("single_rap") => ReadoutScheme::SingleRap,
            Some("gaussian_pi") => ReadoutScheme::GaussianPi,
            Some(other) => {
                return Err(Error::Config(format!(
                    "[readout] unknown shelving scheme '{other}' \
                     (expected gaussian_pi, single_rap, double_rap)"
                )))
            }
        };
        Ok(ShelvingChoice::Simulated { scheme, params: self.readout_pulse_params()? })
    }

    pub fn readout_model(&self) -> Result<ReadoutModel> {
        let model = ReadoutModel {
            bright_mean: self.file.readout.bright_mean,
            dark_mean: self.file.readout.dark_mean,
            window: self.file.readout.window.0,
            threshold: self.file.readout.threshold,
            shelving_efficiency: 1.0,
        };
        model.validate()?;
        Ok(model)
    }

    /// Lamb-Dicke factor of the configured probe beam pair on the axial mode.
    pub fn probe_lamb_dicke(&self) -> Result<f64> {
        let k = match self.file.scan.beams.as_str() {
            "r1_r2" => effective_wavevector(&self.beams["r1"], Some(&self.beams["r2"])),
            "r1_cc" => effective_wavevector(&self.beams["r1"], Some(&self.beams["cc"])),
            "quadrupole" => effective_wavevector(&self.beams["q729"], None),
            other => {
                return Err(Error::Config(format!(
                    "[scan] unknown beams '{other}' (expected r1_r2, r1_cc, quadrupole)"
                )))
            }
        };
        lamb_dicke_factor(k, self.trap.axial_frequency, self.trap.ion_mass)
    }

    /// Base Rabi frequency of the configured probe drive.
    pub fn probe_rabi_frequency(&self) -> Result<f64> {
        match self.file.scan.beams.as_str() {
            "r1_r2" => raman_rabi_frequency(
                self.beams["r1"].resonant_rabi_frequency,
                self.beams["r2"].resonant_rabi_frequency,
                self.beams["r1"].detuning,
            ),
            "r1_cc" => raman_rabi_frequency(
                self.beams["r1"].resonant_rabi_frequency,
                self.beams["cc"].resonant_rabi_frequency,
                self.beams["r1"].detuning,
            ),
            "quadrupole" => Ok(self.beams["q729"].resonant_rabi_frequency),
            other => Err(Error::Config(format!("[scan] unknown beams '{other}'"))),
        }
    }

    fn validate_scan(&self) -> Result<()> {
        let scan = &self.file.scan;
        if scan.points == 0 {
            return Err(Error::Config("[scan] points must be at least 1".into()));
        }
        let (start, stop) = self.scan_bounds()?;
        if scan.points > 1 && !(stop > start) {
            return Err(Error::Config(format!(
                "[scan] empty range: stop ({}) must exceed start ({}) for {} points",
                scan.stop, scan.start, scan.points
            )));
        }
        if scan.shots == 0 {
            return Err(Error::Config("[scan] shots must be at least 1".into()));
        }
        match scan.kind.as_str() {
            "pulse_duration" => {}
            "detuning" | "delay" => {
                if scan.probe_duration.is_none() {
                    return Err(Error::Config(format!(
                        "[scan] kind '{}' requires probe_duration",
                        scan.kind
                    )));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "[scan] unknown kind '{other}' (expected pulse_duration, detuning, delay)"
                )))
            }
        }
        self.probe_lamb_dicke()?;
        self.probe_rabi_frequency()?;
        Ok(())
    }

    fn scan_bounds(&self) -> Result<(f64, f64)> {
        let scan = &self.file.scan;
        match scan.kind.as_str() {
            "detuning" => Ok((parse_frequency(&scan.start)?, parse_frequency(&scan.stop)?)),
            _ => Ok((parse_duration(&scan.start)?, parse_duration(&scan.stop)?)),
        }
    }

    pub fn cooling_schedule(&self) -> Result<Option<(CoolingSchedule, TransitionSpec)>> {
        let c = &self.file.cooling;
        if !c.enabled {
            return Ok(None);
        }
        let stages = if c.stages.is_empty() {
            CoolingSchedule::default().stages
        } else {
            c.stages
                .iter()
                .map(|s| CoolingStage {
                    rsb_pulse_duration: s.rsb_pulse.0,
                    quench_duration: s.quench.0,
                    cycles: s.cycles,
                })
                .collect()
        };
        let repump_style = match c.repump.as_str() {
            "sigma_397" => RepumpStyle::Sigma397,
            "pump_729" => RepumpStyle::Pump729,
            other => {
                return Err(Error::Config(format!(
                    "[cooling] unknown repump '{other}' (expected sigma_397, pump_729)"
                )))
            }
        };
        let schedule = CoolingSchedule {
            stages,
            cycles_per_repump: c.cycles_per_repump,
            repump_style,
            wrong_spin_branching: c
                .wrong_spin_branching
                .unwrap_or(CoolingSchedule::default().wrong_spin_branching),
            carrier_reheating: c.carrier_reheating,
        };
        schedule.validate()?;

        let q729 = &self.beams["q729"];
        let k = effective_wavevector(q729, None);
        let eta = lamb_dicke_factor(k, self.trap.axial_frequency, self.trap.ion_mass)?;
        let transition = TransitionSpec {
            base_rabi_frequency: c
                .rsb_rabi_frequency
                .map(|f| f.0)
                .unwrap_or(q729.resonant_rabi_frequency),
            lamb_dicke: eta,
            kind: TransitionKind::RedSideband,
            detuning: 0.0,
        };
        transition.validate()?;
        Ok(Some((schedule, transition)))
    }

    /// Resolve the full sequence plan; `seed_override` replaces [seed].
    pub fn to_plan(&self, seed_override: Option<u64>) -> Result<SequencePlan> {
        let scan = &self.file.scan;
        let kind = match scan.kind.as_str() {
            "pulse_duration" => ScanAxisKind::PulseDuration,
            "detuning" => ScanAxisKind::Detuning,
            "delay" => ScanAxisKind::Delay,
            other => return Err(Error::Config(format!("[scan] unknown kind '{other}'"))),
        };
        let (start, stop) = self.scan_bounds()?;
        let transition_kind = match scan.transition.as_str() {
            "carrier" => TransitionKind::Carrier,
            "rsb" => TransitionKind::RedSideband,
            "bsb" => TransitionKind::BlueSideband,
            other => {
                return Err(Error::Config(format!(
                    "[scan] unknown transition '{other}' (expected carrier, rsb, bsb)"
                )))
            }
        };
        let probe = TransitionSpec {
            base_rabi_frequency: self.probe_rabi_frequency()?,
            lamb_dicke: self.probe_lamb_dicke()?,
            kind: transition_kind,
            detuning: 0.0,
        };
        probe.validate()?;

        Ok(SequencePlan {
            doppler_nbar: self.file.cooling.doppler_nbar,
            fock_cutoff: self.file.cooling.fock_cutoff,
            sideband_cooling: self.cooling_schedule()?,
            pump: self.pump_config()?,
            probe,
            decoherence: self.decoherence(),
            heating: self.heating(),
            readout: self.readout_model()?,
            shelving: self.shelving_choice()?,
            axial_frequency: self.trap.axial_frequency,
            scan: ScanSpec {
                kind,
                start,
                stop,
                points: scan.points,
                shots: scan.shots,
                delays: scan.delays.iter().map(|d| d.0).collect(),
                probe_duration: scan.probe_duration.map(|d| d.0).unwrap_or(10e-6),
            },
            seed: seed_override.unwrap_or(self.file.seed.master),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    const MINIMAL: &str = r#"
[scan]
kind = "pulse_duration"
start = "0 us"
stop = "400 us"
points = 200

[seed]
master = 42
"#;

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let config = SequenceConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(config.seed(), 42);
        assert_relative_eq!(config.trap.axial_frequency, TAU * 1.35e6);
        let eta = config.probe_lamb_dicke().unwrap();
        assert!((eta - 0.21).abs() < 0.005, "eta {eta}");
        let omega = config.probe_rabi_frequency().unwrap();
        assert!((omega / TAU - 101.25e3).abs() < 100.0, "omega {}", omega / TAU);
        let plan = config.to_plan(None).unwrap();
        assert_eq!(plan.scan.points, 200);
        assert_eq!(plan.seed, 42);
        assert_eq!(config.digest().len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{MINIMAL}\n[trap]\naxial_frequenzy = \"1 MHz\"\n");
        let err = SequenceConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("axial_frequenzy"), "{err}");
        let bad_beam = format!("{MINIMAL}\n[beams.r9]\nrabi_frequency = \"1 MHz\"\ndetuning = \"1 GHz\"\nwavelength_nm = 397.0\nangle_to_axis_deg = 0.0\n");
        assert!(SequenceConfig::from_toml(&bad_beam).is_err());
    }

    #[test]
    fn missing_required_section_is_named() {
        let err = SequenceConfig::from_toml("[seed]\nmaster = 1\n").unwrap_err();
        assert!(err.to_string().contains("scan"), "{err}");
    }

    #[test]
    fn empty_scan_range_is_named() {
        let bad = r#"
[scan]
kind = "pulse_duration"
start = "100 us"
stop = "100 us"
points = 50

[seed]
master = 1
"#;
        let err = SequenceConfig::from_toml(bad).unwrap_err();
        assert!(err.to_string().contains("[scan]"), "{err}");
    }

    #[test]
    fn frequencies_without_units_are_rejected() {
        let bad = format!("{MINIMAL}\n[trap]\naxial_frequency = \"1.35\"\nradial_frequencies = [\"2 MHz\", \"3.5 MHz\"]\nrf_drive_frequency = \"24.8 MHz\"\nion_mass_amu = 40.0\n");
        let err = SequenceConfig::from_toml(&bad).unwrap_err();
        assert!(err.to_string().contains("unit suffix"), "{err}");
    }

    #[test]
    fn copropagating_pair_gives_zero_eta() {
        let toml = r#"
[scan]
kind = "pulse_duration"
beams = "r1_cc"
start = "0 us"
stop = "40 us"
points = 80

[seed]
master = 7
"#;
        let config = SequenceConfig::from_toml(toml).unwrap();
        assert_eq!(config.probe_lamb_dicke().unwrap(), 0.0);
    }

    #[test]
    fn digest_tracks_content() {
        let a = SequenceConfig::from_toml(MINIMAL).unwrap();
        let b = SequenceConfig::from_toml(&format!("{MINIMAL}\n# comment\n")).unwrap();
        assert_ne!(a.digest(), b.digest());
    }
}
