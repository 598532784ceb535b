//! Unit-suffixed value parsing for config files and CLI flags.
//!
//! Frequencies are written as ordinary (cycle) frequencies with an explicit
//! suffix — "1.35 MHz" — and converted to angular rad/s exactly once, here.
//! Durations use s/ms/us/ns, rates use /s or /ms. Values without a suffix
//! are rejected: the suffix is what rules out 2π mistakes.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

fn split_value(s: &str) -> Result<(f64, &str)> {
    let t = s.trim();
    let split = t
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-' | 'e' | 'E')))
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    // guard against exponents eating the unit ("1e6 Hz" splits at the space)
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse number in '{s}'")))?;
    Ok((value, unit.trim()))
}

/// Parse "1.35 MHz" style frequencies into angular rad/s. Signed values are
/// allowed (detunings).
pub fn parse_frequency(s: &str) -> Result<f64> {
    let (value, unit) = split_value(s)?;
    let hz = match unit {
        "Hz" => 1.0,
        "kHz" => 1e3,
        "MHz" => 1e6,
        "GHz" => 1e9,
        "" => {
            return Err(Error::Parse(format!(
                "frequency '{s}' needs a unit suffix (Hz, kHz, MHz, GHz)"
            )))
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown frequency unit '{other}' in '{s}' (expected Hz, kHz, MHz, GHz)"
            )))
        }
    };
    Ok(TAU * value * hz)
}

/// Parse "10 us" style durations into seconds.
pub fn parse_duration(s: &str) -> Result<f64> {
    let (value, unit) = split_value(s)?;
    let scale = match unit {
        "s" => 1.0,
        "ms" => 1e-3,
        "us" | "µs" => 1e-6,
        "ns" => 1e-9,
        "" => {
            return Err(Error::Parse(format!(
                "duration '{s}' needs a unit suffix (s, ms, us, ns)"
            )))
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown duration unit '{other}' in '{s}' (expected s, ms, us, ns)"
            )))
        }
    };
    Ok(value * scale)
}

/// Parse "0.3 /ms" style rates into 1/s.
pub fn parse_rate(s: &str) -> Result<f64> {
    let (value, unit) = split_value(s)?;
    let scale = match unit {
        "/s" => 1.0,
        "/ms" => 1e3,
        "/us" | "/µs" => 1e6,
        "" => {
            return Err(Error::Parse(format!("rate '{s}' needs a unit suffix (/s, /ms, /us)")))
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown rate unit '{other}' in '{s}' (expected /s, /ms, /us)"
            )))
        }
    };
    Ok(value * scale)
}

/// Angular rad/s to cycle kHz, for report output.
pub fn to_khz(angular: f64) -> f64 {
    angular / TAU / 1e3
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frequency_suffixes() {
        assert_relative_eq!(parse_frequency("1.35 MHz").unwrap(), TAU * 1.35e6);
        assert_relative_eq!(parse_frequency("22MHz").unwrap(), TAU * 22e6);
        assert_relative_eq!(parse_frequency("-40 GHz").unwrap(), -TAU * 40e9);
        assert_relative_eq!(parse_frequency("50 kHz").unwrap(), TAU * 50e3);
        assert_relative_eq!(parse_frequency("0 Hz").unwrap(), 0.0);
        assert!(parse_frequency("1.35").is_err());
        assert!(parse_frequency("1.35 mhz").is_err());
    }

    #[test]
    fn duration_suffixes() {
        assert_relative_eq!(parse_duration("10 us").unwrap(), 10e-6);
        assert_relative_eq!(parse_duration("3 ms").unwrap(), 3e-3);
        assert_relative_eq!(parse_duration("2s").unwrap(), 2.0);
        assert!(parse_duration("10").is_err());
    }

    #[test]
    fn rate_suffixes() {
        assert_relative_eq!(parse_rate("0.3 /ms").unwrap(), 300.0);
        assert_relative_eq!(parse_rate("12 /s").unwrap(), 12.0);
        assert!(parse_rate("0.3").is_err());
    }

    #[test]
    fn khz_round_trip() {
        assert_relative_eq!(to_khz(parse_frequency("20.5 kHz").unwrap()), 20.5);
    }
}
