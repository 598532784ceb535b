//! Physical constants (SI units).

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Atomic mass unit (kg).
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// Nominal mass of a calcium-40 ion, 40 u (kg).
pub const CA40_MASS: f64 = 40.0 * ATOMIC_MASS;

/// √18, the Clebsch-Gordan combination entering the Rabi-cycles-per-scatter
/// figure of merit for the 397 nm Raman configuration.
pub const SQRT_18: f64 = 4.242_640_687_119_285;

/// Natural linewidth of the S1/2 - P1/2 dipole transition, Γ = 2π·22 MHz (rad/s).
pub const DIPOLE_LINEWIDTH: f64 = 2.0 * std::f64::consts::PI * 22.0e6;
