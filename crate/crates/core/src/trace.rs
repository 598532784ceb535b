//! File formats: the `time_us,p_down,shots,successes` trace CSV, curve CSVs,
//! reconstruction reports and run manifests. All writes are atomic
//! (write-then-rename), all text is UTF-8 with LF endings.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sequence::TraceResult;
use crate::tomography::{HeatingFit, RabiTrace, ReconstructionResult};
use crate::units::to_khz;

/// Write `content` to `path` atomically via a sibling temp file.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Render one simulated trace as the trace-file CSV.
pub fn trace_csv(trace: &TraceResult) -> String {
    let mut out = String::from("time_us,p_down,shots,successes\n");
    for (axis, point) in trace.axis.iter().zip(&trace.points) {
        out.push_str(&format!(
            "{:.6},{:.6},{},{}\n",
            axis * 1e6,
            point.estimate(),
            point.shots,
            point.successes
        ));
    }
    out
}

/// Parse a trace-file CSV into a [`RabiTrace`]. Errors cite the line number.
pub fn read_trace_csv(path: &Path) -> Result<RabiTrace> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read trace '{}': {e}", path.display())))?;
    parse_trace_csv(&raw).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parse trace CSV text (header `time_us,p_down,shots,successes`).
pub fn parse_trace_csv(raw: &str) -> Result<RabiTrace> {
    let mut lines = raw.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("line 1: empty trace file".into()))?
        .1;
    if header.trim() != "time_us,p_down,shots,successes" {
        return Err(Error::Parse(format!(
            "line 1: bad header '{header}' (expected time_us,p_down,shots,successes)"
        )));
    }
    let mut times = Vec::new();
    let mut p_down = Vec::new();
    let mut shots_column = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {row}: expected 4 comma-separated fields, got {}",
                fields.len()
            )));
        }
        let time_us: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {row}: bad time '{}'", fields[0])))?;
        let p: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {row}: bad p_down '{}'", fields[1])))?;
        let shots: u32 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {row}: bad shots '{}'", fields[2])))?;
        let successes: u32 = fields[3]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {row}: bad successes '{}'", fields[3])))?;
        if successes > shots {
            return Err(Error::Parse(format!(
                "line {row}: successes {successes} exceed shots {shots}"
            )));
        }
        if let Some(&prev) = times.last() {
            if time_us * 1e-6 <= prev {
                return Err(Error::Parse(format!(
                    "line {row}: time_us must be strictly increasing"
                )));
            }
        }
        times.push(time_us * 1e-6);
        p_down.push(p);
        shots_column.push(shots);
    }
    if times.is_empty() {
        return Err(Error::Parse("trace file holds no data rows".into()));
    }
    let shots = shots_column[0];
    RabiTrace::new(times, p_down, shots)
}

/// Render a generic curve CSV with a self-describing header.
pub fn curve_csv(header: &str, rows: &[Vec<f64>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.9}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Spectrum CSV (`frequency_khz,magnitude`).
pub fn spectrum_csv(frequencies: &[f64], magnitudes: &[f64]) -> String {
    let mut out = String::from("frequency_khz,magnitude\n");
    for (f, m) in frequencies.iter().zip(magnitudes) {
        out.push_str(&format!("{:.6},{:.9}\n", to_khz(*f), m));
    }
    out
}

/// Structured text report of a reconstruction. Keys are machine-parsable
/// `key = value` lines; the P_n table follows.
pub fn reconstruction_report(
    rec: &ReconstructionResult,
    trace: &RabiTrace,
    trace_path: &str,
    delay_s: Option<f64>,
    omega0: f64,
    eta: f64,
) -> String {
    let mut out = String::from("# phonon reconstruction report\n");
    out.push_str(&format!("trace = {trace_path}\n"));
    if let Some(d) = delay_s {
        out.push_str(&format!("delay_ms = {:.6}\n", d * 1e3));
    }
    out.push_str(&format!("omega0_khz = {:.6}\n", to_khz(omega0)));
    out.push_str(&format!("eta = {eta:.6}\n"));
    out.push_str(&format!("contrast = {:.6}\n", rec.contrast));
    out.push_str(&format!("decay_rate_per_s = {:.6}\n", rec.decay_rate));
    if rec.decay_rate > 0.0 {
        out.push_str(&format!("coherence_time_us = {:.3}\n", 1e6 / rec.decay_rate));
    }
    out.push_str(&format!("nbar = {:.6}\n", rec.mean_phonon));
    if let Some(s) = rec.nbar_sigma {
        out.push_str(&format!("nbar_sigma = {s:.6}\n"));
    }
    out.push_str(&format!("nbar_tail_bound = {:.3e}\n", rec.mean_tail_bound));
    out.push_str(&format!("residual_norm = {:.6e}\n", rec.residual_norm));
    // flag fits whose residual clearly exceeds the projection-noise floor
    let per_point = rec.residual_norm / (trace.times().len() as f64).sqrt();
    let noise_floor = (0.25 / trace.shots_per_point().max(1) as f64).sqrt();
    let fit_flag = if per_point > 3.0 * noise_floor.max(1e-4) { "model_mismatch" } else { "ok" };
    out.push_str(&format!("residual_per_point = {per_point:.6e}\n"));
    out.push_str(&format!("fit_flag = {fit_flag}\n"));
    out.push_str(&format!("iterations = {}\n", rec.iterations));
    if rec.bootstrap_failures > 0 {
        out.push_str(&format!("bootstrap_failures = {}\n", rec.bootstrap_failures));
    }
    out.push_str("# n, P_n, sigma\n");
    for (n, p) in rec.distribution.probabilities().iter().enumerate() {
        let sigma = rec.p_sigma.get(n).copied();
        match sigma {
            Some(s) => out.push_str(&format!("P[{n}] = {p:.6} +- {s:.6}\n")),
            None => out.push_str(&format!("P[{n}] = {p:.6}\n")),
        }
    }
    out
}

/// Parse `key = value` pairs out of a report file.
pub fn parse_report_keys(raw: &str) -> std::collections::BTreeMap<String, String> {
    raw.lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// Heating fit report.
pub fn heating_report(fit: &HeatingFit, points: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("# heating rate fit\n");
    out.push_str(&format!("rate_per_ms = {:.6}\n", fit.rate * 1e-3));
    out.push_str(&format!("rate_stderr_per_ms = {:.6}\n", fit.rate_stderr * 1e-3));
    out.push_str(&format!("intercept_nbar = {:.6}\n", fit.intercept));
    out.push_str(&format!("intercept_stderr = {:.6}\n", fit.intercept_stderr));
    out.push_str(&format!("points = {}\n", points.len()));
    out.push_str("# delay_ms, nbar, sigma\n");
    for (d, n, s) in points {
        out.push_str(&format!("{:.6},{:.6},{:.6}\n", d * 1e3, n, s));
    }
    out
}

/// Run manifest: everything needed to audit and reproduce a command.
#[derive(Debug, serde::Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, digest: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_string(),
            config_digest: digest.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        write_atomic(&path, &format!("{body}\n"))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::DetectedPoint;

    fn sample_trace() -> TraceResult {
        TraceResult {
            delay: 0.0,
            axis: vec![0.0, 2e-6, 4e-6],
            ideal: vec![0.98, 0.5, 0.1],
            points: vec![
                DetectedPoint { shots: 100, successes: 97 },
                DetectedPoint { shots: 100, successes: 52 },
                DetectedPoint { shots: 100, successes: 11 },
            ],
        }
    }

    #[test]
    fn trace_csv_round_trips() {
        let csv = trace_csv(&sample_trace());
        assert!(csv.starts_with("time_us,p_down,shots,successes\n"));
        assert!(!csv.contains('\r'));
        let parsed = parse_trace_csv(&csv).unwrap();
        assert_eq!(parsed.times().len(), 3);
        assert_eq!(parsed.shots_per_point(), 100);
        assert!((parsed.p_down()[1] - 0.52).abs() < 1e-9);
    }

    #[test]
    fn malformed_rows_cite_line_numbers() {
        let bad = "time_us,p_down,shots,successes\n0.0,0.5,100,40\n2.0,0.5,100\n";
        let err = parse_trace_csv(bad).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");

        let bad2 = "time_us,p_down,shots,successes\n0.0,0.5,100,140\n";
        let err2 = parse_trace_csv(bad2).unwrap_err();
        assert!(err2.to_string().contains("exceed"), "{err2}");

        let bad3 = "time_us,p_down,shots,successes\n2.0,0.5,100,40\n1.0,0.5,100,40\n";
        let err3 = parse_trace_csv(bad3).unwrap_err();
        assert!(err3.to_string().contains("increasing"), "{err3}");
    }

    #[test]
    fn atomic_write_creates_parents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        write_atomic(&path, "hello\n").unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), "hello\n");
    }

    #[test]
    fn report_keys_parse_back() {
        let raw = "# comment\nnbar = 0.24\ndelay_ms = 3.0\n";
        let keys = parse_report_keys(raw);
        assert_eq!(keys["nbar"], "0.24");
        assert_eq!(keys["delay_ms"], "3.0");
    }
}
