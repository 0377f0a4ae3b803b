//! Simulation and analysis of passive dynamical decoupling in trapped-ion
//! hyperfine manifolds.
//!
//! The quantization field of an ion is rotated adiabatically so that every
//! Zeeman sublevel `|F, m⟩` is carried to `|F, −m⟩`, inverting its field
//! sensitivity without driving any transition. This crate propagates the
//! Zeeman states under such field schedules, measures their noise filter
//! response and leakage, and simulates a spin-dependent-force gate that uses
//! a continuously rotating field.
//!
//! Units are fixed crate-wide; see [`units`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod field_schedule;
pub mod gate_sim;
pub mod linalg;
pub mod pdd_analysis;
pub mod propagator;
pub mod quadrature;
pub mod spin_algebra;
pub mod units;
