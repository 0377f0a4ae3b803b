//! Unit conventions and physical constants.
//!
//! Every interface in this crate uses the same unit system:
//!
//! | quantity          | unit        |
//! |-------------------|-------------|
//! | time              | μs          |
//! | angular frequency | rad/μs      |
//! | magnetic field    | Gauss       |
//!
//! Energies are carried as angular frequencies (ħ = 1), so a Hamiltonian
//! entry of `1.0` means 1 rad/μs. A frequency of 1 MHz is `2π` rad/μs.

use std::f64::consts::PI;

/// Bohr magneton over Planck's constant, MHz/Gauss (CODATA).
pub const BOHR_MAGNETON_MHZ_PER_GAUSS: f64 = 1.399624604;

/// Bohr magneton over ħ in rad/(μs·Gauss).
pub const BOHR_MAGNETON: f64 = 2.0 * PI * BOHR_MAGNETON_MHZ_PER_GAUSS;

/// Free-electron g-factor for an S₁/₂ level.
pub const ELECTRON_G_FACTOR: f64 = 2.0023193;

/// Converts a frequency in MHz to rad/μs.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f
}

/// Converts a frequency in kHz to rad/μs.
pub fn khz(f: f64) -> f64 {
    2.0 * PI * f * 1e-3
}

/// Converts a frequency in GHz to rad/μs.
pub fn ghz(f: f64) -> f64 {
    2.0 * PI * f * 1e3
}

/// Converts rad/μs back to MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Converts rad/μs back to kHz.
pub fn to_khz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e3
}
