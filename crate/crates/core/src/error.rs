//! Crate-wide error type and the CLI exit-code contract.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a mathematical precondition (negative mass,
    /// zero Raman detuning, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration file or CLI argument failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// An input file could not be parsed. Messages cite the offending line.
    #[error("parse error: {0}")]
    Parse(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("integration error: {0}")]
    Integration(String),

    /// A fit or reconstruction failed.
    #[error("fit error: {0}")]
    Fit(String),

    /// Deconvolution ran out of iterations. Carries the best iterate and the
    /// residual history so the caller can inspect (and persist) them.
    #[error(
        "deconvolution did not converge after {iterations} iterations \
         (residual {residual:.6e})"
    )]
    Nonconvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
        best_probabilities: Vec<f64>,
        best_contrast: f64,
        best_decay_rate: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code for the CLI: 2 for validation problems, 3 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Parse(_) | Error::Io(_) => 2,
            Error::Integration(_) | Error::Fit(_) | Error::Nonconvergence { .. } => 3,
        }
    }
}
