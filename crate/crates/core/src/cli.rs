//! Command-line front end: simulate | reconstruct | fit-heating | scan.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::SequenceConfig;
use crate::dynamics::{ramsey_stark_scan, readout_transfer_curve, ReadoutScheme};
use crate::error::{Error, Result};
use crate::physics::{
    rabi_per_scatter_figure_of_merit, raman_rabi_frequency, scattering_probability,
    thermal_distribution,
};
use crate::sequence::{optical_pump, run_sequence, PumpConfig, PumpScheme};
use crate::tomography::{
    deconvolve, heating_rate_fit, predict_line_positions, spectrum_with_lines, DeconvolveOptions,
};
use crate::trace::{
    curve_csv, heating_report, parse_report_keys, read_trace_csv, reconstruction_report,
    spectrum_csv, trace_csv, write_atomic, Manifest,
};
use crate::units::{parse_duration, parse_frequency, to_khz};

#[derive(Parser)]
#[command(
    name = "spinsim",
    version,
    about = "Trapped-ion spin-qubit experiment simulator and phonon tomography"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the full experimental sequence and write trace CSVs.
    Simulate {
        /// Experiment config (TOML with unit-suffixed values).
        config: PathBuf,
        /// Override the [seed] section.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Reconstruct a phonon distribution from a trace CSV.
    Reconstruct {
        /// Trace file (time_us,p_down,shots,successes).
        trace: PathBuf,
        /// Bare sideband Rabi frequency, e.g. "101.25 kHz".
        #[arg(long)]
        omega0: String,
        /// Lamb-Dicke factor of the probe.
        #[arg(long)]
        eta: f64,
        /// Highest Fock level in the fit dictionary.
        #[arg(long)]
        nmax: usize,
        /// Initial contrast guess.
        #[arg(long, default_value_t = 0.9)]
        contrast0: f64,
        /// Initial coherence-time guess, e.g. "200 us".
        #[arg(long, default_value = "200 us")]
        coherence0: String,
        /// Delay metadata recorded in the report, e.g. "3 ms".
        #[arg(long)]
        delay: Option<String>,
        /// Bootstrap resamples for the P_n error bars (0 disables).
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit a heating rate through reconstructed n̄(delay) points.
    FitHeating {
        /// CSV of `delay_ms,nbar,sigma_nbar` rows, or a directory of
        /// reconstruction reports.
        points: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Emit the standard characterization curves as CSV.
    Scan {
        /// readout_detuning | pump_duration | stark_ramsey | scatter_fom
        #[arg(long)]
        kind: String,
        /// Experiment config.
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => cmd_simulate(&config, seed, &out),
        Command::Reconstruct {
            trace,
            omega0,
            eta,
            nmax,
            contrast0,
            coherence0,
            delay,
            bootstrap,
            out,
        } => cmd_reconstruct(
            &trace, &omega0, eta, nmax, contrast0, &coherence0, delay.as_deref(), bootstrap, &out,
        ),
        Command::FitHeating { points, out } => cmd_fit_heating(&points, &out),
        Command::Scan { kind, config, out } => cmd_scan(&kind, &config, &out),
    }
}

fn cmd_simulate(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let config = SequenceConfig::from_path(config_path)?;
    let plan = config.to_plan(seed)?;
    let dataset = run_sequence(&plan)?;

    let mut manifest = Manifest::new("simulate", config.digest(), plan.seed);
    for (idx, trace) in dataset.traces.iter().enumerate() {
        let name = format!("trace_{idx:02}.csv");
        write_atomic(&out.join(&name), &trace_csv(trace))?;
        manifest.files.push(format!("{name} delay_ms={:.6}", trace.delay * 1e3));
    }
    let manifest_path = manifest.write(out)?;
    println!(
        "simulate: wrote {} trace(s) and {} (prepared nbar = {:.4}, init fidelity = {:.4}, \
         shelving = {:.4})",
        dataset.traces.len(),
        manifest_path.display(),
        dataset.prepared.mean(),
        dataset.init_fidelity,
        dataset.shelving_efficiency,
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_reconstruct(
    trace_path: &Path,
    omega0: &str,
    eta: f64,
    nmax: usize,
    contrast0: f64,
    coherence0: &str,
    delay: Option<&str>,
    bootstrap: usize,
    out: &Path,
) -> Result<()> {
    let trace = read_trace_csv(trace_path)?;
    let omega0 = parse_frequency(omega0)?;
    let gamma0 = 1.0 / parse_duration(coherence0)?;
    let delay_s = delay.map(parse_duration).transpose()?;
    let lines = predict_line_positions(omega0, eta, nmax);
    let opts = DeconvolveOptions { bootstrap_resamples: bootstrap, ..DeconvolveOptions::default() };

    let rec = match deconvolve(&trace, &lines, contrast0, gamma0, &opts) {
        Ok(rec) => rec,
        Err(Error::Nonconvergence { iterations, residual, history, best_probabilities, best_contrast, best_decay_rate }) => {
            // persist the residual history for inspection, then fail
            let hist_path = out.join("residual_history.csv");
            let rows: Vec<Vec<f64>> =
                history.iter().enumerate().map(|(i, r)| vec![i as f64, *r]).collect();
            write_atomic(&hist_path, &curve_csv("iteration,residual", &rows))?;
            return Err(Error::Nonconvergence {
                iterations,
                residual,
                history: vec![],
                best_probabilities,
                best_contrast,
                best_decay_rate,
            });
        }
        Err(e) => return Err(e),
    };

    let report = reconstruction_report(
        &rec,
        &trace,
        &trace_path.display().to_string(),
        delay_s,
        omega0,
        eta,
    );
    write_atomic(&out.join("reconstruction.txt"), &report)?;
    let spectrum = spectrum_with_lines(&trace, omega0, eta, nmax)?;
    write_atomic(&out.join("spectrum.csv"), &spectrum_csv(&spectrum.frequencies, &spectrum.magnitudes))?;
    print!("{report}");
    Ok(())
}

fn load_heating_points(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let mut points = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|x| x == "txt").unwrap_or(false))
            .collect();
        entries.sort();
        for entry in entries {
            let raw = std::fs::read_to_string(&entry)?;
            let keys = parse_report_keys(&raw);
            let (Some(delay), Some(nbar)) = (keys.get("delay_ms"), keys.get("nbar")) else {
                continue;
            };
            let delay: f64 = delay.parse().map_err(|_| {
                Error::Parse(format!("{}: bad delay_ms '{delay}'", entry.display()))
            })?;
            let nbar: f64 = nbar.parse().map_err(|_| {
                Error::Parse(format!("{}: bad nbar '{nbar}'", entry.display()))
            })?;
            let sigma: f64 = keys
                .get("nbar_sigma")
                .map(|s| s.parse())
                .transpose()
                .map_err(|_| Error::Parse(format!("{}: bad nbar_sigma", entry.display())))?
                .unwrap_or(0.0);
            points.push((delay * 1e-3, nbar, sigma));
        }
    } else {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read '{}': {e}", path.display())))?;
        for (idx, line) in raw.lines().enumerate() {
            let row = idx + 1;
            if idx == 0 {
                if line.trim() != "delay_ms,nbar,sigma_nbar" {
                    return Err(Error::Parse(format!(
                        "line 1: bad header '{line}' (expected delay_ms,nbar,sigma_nbar)"
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {row}: expected 3 fields")));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {row}: bad number '{s}'")))
            };
            points.push((parse(fields[0])? * 1e-3, parse(fields[1])?, parse(fields[2])?));
        }
    }
    Ok(points)
}

fn cmd_fit_heating(points_path: &Path, out: &Path) -> Result<()> {
    let points = load_heating_points(points_path)?;
    if points.len() < 2 {
        return Err(Error::Fit(format!(
            "heating fit needs at least 2 usable points, found {} in '{}'",
            points.len(),
            points_path.display()
        )));
    }
    let fit = heating_rate_fit(&points)?;
    let report = heating_report(&fit, &points);
    write_atomic(&out.join("heating_fit.txt"), &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_scan(kind: &str, config_path: &Path, out: &Path) -> Result<()> {
    let config = SequenceConfig::from_path(config_path)?;
    let mut manifest = Manifest::new(&format!("scan {kind}"), config.digest(), config.seed());
    match kind {
        "readout_detuning" => {
            let params = config.readout_pulse_params()?;
            // Doppler-cooled ion: the motional spread behind the 95% single-RAP
            let spread = thermal_distribution(15.0, 200)?;
            let grid: Vec<f64> = (-60..=60)
                .map(|k| std::f64::consts::TAU * 10e3 * k as f64)
                .collect();
            let gauss =
                readout_transfer_curve(ReadoutScheme::GaussianPi, &grid, &spread, &params)?;
            let single =
                readout_transfer_curve(ReadoutScheme::SingleRap, &grid, &spread, &params)?;
            let double =
                readout_transfer_curve(ReadoutScheme::DoubleRap, &grid, &spread, &params)?;
            let rows: Vec<Vec<f64>> = grid
                .iter()
                .enumerate()
                .map(|(i, &d)| vec![to_khz(d), gauss[i], single[i], double[i]])
                .collect();
            let name = "readout_detuning.csv";
            write_atomic(
                &out.join(name),
                &curve_csv("detuning_khz,gaussian_pi,single_rap,double_rap", &rows),
            )?;
            manifest.files.push(name.into());
        }
        "pump_duration" => {
            let base = config.pump_config()?;
            let pulse_counts = [1u32, 2, 3, 5];
            let mut curves = Vec::new();
            for &n in &pulse_counts {
                let outcome =
                    optical_pump(&PumpConfig { n_pulses: n, ..base.clone() }, 0.0)?;
                curves.push(outcome.curve);
            }
            let cw = optical_pump(
                &PumpConfig { scheme: PumpScheme::Cw, n_pulses: 10, ..base.clone() },
                0.0,
            )?;
            let rows: Vec<Vec<f64>> = curves[0]
                .iter()
                .enumerate()
                .map(|(i, &(t, _))| {
                    let mut row = vec![t * 1e6];
                    for curve in &curves {
                        row.push(curve[i].1);
                    }
                    // map the cw curve onto the same horizontal scale
                    let frac = i as f64 / (curves[0].len() - 1) as f64;
                    let cw_idx = (frac * (cw.curve.len() - 1) as f64).round() as usize;
                    row.push(cw.curve[cw_idx].1);
                    row
                })
                .collect();
            let name = "pump_duration.csv";
            write_atomic(
                &out.join(name),
                &curve_csv("duration_us,pulses_1,pulses_2,pulses_3,pulses_5,cw", &rows),
            )?;
            manifest.files.push(name.into());
        }
        "stark_ramsey" => {
            let gap = 50e-6;
            let durations: Vec<f64> = (0..=250).map(|k| gap * k as f64 / 250.0).collect();
            let scan = ramsey_stark_scan(&config.beams["r1"], &durations, gap)?;
            let rows: Vec<Vec<f64>> = scan
                .durations
                .iter()
                .zip(&scan.signal)
                .map(|(&t, &s)| vec![t * 1e6, s])
                .collect();
            let name = "stark_ramsey.csv";
            write_atomic(&out.join(name), &curve_csv("duration_us,signal", &rows))?;
            manifest.files.push(name.into());
            println!(
                "stark_ramsey: true shift {:.3} kHz, extracted {:.3} kHz \
                 (fringe period {:.4} us)",
                to_khz(scan.true_shift),
                to_khz(scan.extracted_shift),
                scan.fringe_period * 1e6,
            );
        }
        "scatter_fom" => {
            let constants = config.atomic_constants();
            let r1 = &config.beams["r1"];
            let r2 = &config.beams["r2"];
            let gamma = constants.dipole_linewidth;
            let mut rows = Vec::new();
            for sign in [-1.0, 1.0] {
                for k in 10..=100 {
                    let delta = sign * std::f64::consts::TAU * 1e9 * k as f64;
                    // simulated route: Raman Rabi over the geometric mean of
                    // the two scattering rates, times the Clebsch-Gordan factor
                    let omega_eff = raman_rabi_frequency(
                        r1.resonant_rabi_frequency,
                        r2.resonant_rabi_frequency,
                        delta,
                    )?;
                    let rate1 = gamma * scattering_probability(r1.resonant_rabi_frequency, delta)?;
                    let rate2 = gamma * scattering_probability(r2.resonant_rabi_frequency, delta)?;
                    let simulated = constants.figure_factor * omega_eff / (rate1 * rate2).sqrt();
                    let theory = rabi_per_scatter_figure_of_merit(delta, &constants);
                    rows.push(vec![delta / std::f64::consts::TAU / 1e9, simulated, theory]);
                }
            }
            rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let name = "scatter_fom.csv";
            write_atomic(&out.join(name), &curve_csv("detuning_ghz,fom,fom_theory", &rows))?;
            manifest.files.push(name.into());
        }
        other => {
            return Err(Error::Config(format!(
                "unknown scan kind '{other}' (expected readout_detuning, pump_duration, \
                 stark_ramsey, scatter_fom)"
            )))
        }
    }
    manifest.write(out)?;
    Ok(())
}
