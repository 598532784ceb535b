//! Deterministic simulator of a trapped-ion spin-qubit experiment — spin ×
//! phonon dynamics, pulsed sideband cooling, optical pumping, shelving
//! readout — together with the inverse pipeline that reconstructs phonon
//! number distributions and heating rates from sideband Rabi traces.
//!
//! Conventions: frequencies are angular (rad/s) everywhere inside the crate;
//! unit-suffixed strings ("1.35 MHz", "10 us") exist only at the config/CLI
//! boundary. All randomness flows through counter-based streams derived from
//! a master seed, so every result is reproducible bit for bit.

pub mod cli;
pub mod config;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod physics;
pub mod rng;
pub mod sequence;
pub mod tomography;
pub mod trace;
pub mod units;

pub use error::{Error, Result};
pub use physics::PhononDistribution;
