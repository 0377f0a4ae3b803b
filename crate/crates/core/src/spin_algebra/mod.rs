//! Angular-momentum operators, Clebsch–Gordan coupling and the hyperfine
//! Hamiltonians of an S₁/₂ manifold in the coupled `|F, m_F⟩` basis.
//!
//! Basis ordering is fixed everywhere: `F` descending, and `m_F` descending
//! within each `F` block. The uncoupled basis `|m_I, m_J⟩` is ordered with
//! `m_I` descending as the slow index and `m_J` descending as the fast one.

mod angular;
mod cg;
mod hyperfine;
mod species;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{self, CMatrix};

pub use angular::{angular_momentum_ops, spin_rotation_y};
pub use cg::{clebsch_gordan, coupling_matrix};
pub use hyperfine::{
    electron_rotation_about_y, hyperfine_hamiltonian, rotate_operator, rotation_about_y, zeeman_hamiltonian, HyperfineSystem,
    ZeemanMode, ZeemanModel,
};
pub use species::{SpeciesPreset, SpeciesTable, BUILTIN_SPECIES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("{0} is not a non-negative half-integer spin")]
    InvalidSpin(f64),
    #[error("{0} is not a half-integer projection")]
    InvalidProjection(f64),
    #[error("projection {m} is out of range for spin {j}")]
    ProjectionOutOfRange { j: HalfInt, m: HalfInt },
    #[error("operator dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("state label {0} is not in the basis")]
    UnknownLabel(StateLabel),
    #[error("cannot parse state label `{0}` (expected `F,m`)")]
    BadLabel(String),
    #[error("F = {0} is not a manifold of this system")]
    UnknownManifold(HalfInt),
    #[error("species preset `{0}` not found")]
    UnknownSpecies(String),
    #[error("species table: {0}")]
    SpeciesTable(String),
}

/// A half-integer quantity stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);

    pub const fn from_doubled(doubled: i32) -> Self {
        HalfInt(doubled)
    }

    pub const fn doubled(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Accepts values within 1e-9 of a multiple of 1/2.
    pub fn try_from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let d = (2.0 * x).round();
        if (2.0 * x - d).abs() > 1e-9 || d.abs() > f64::from(i32::MAX) {
            return None;
        }
        Some(HalfInt(d as i32))
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// `m = j, j-1, …, -j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (0..=j).map(move |k| HalfInt(j - 2 * k))
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInt {
    type Err = SpinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: i32 = num.trim().parse().map_err(|_| SpinError::BadLabel(s.into()))?;
            match den.trim() {
                "2" => Ok(HalfInt(num)),
                "1" => Ok(HalfInt(2 * num)),
                _ => Err(SpinError::BadLabel(s.into())),
            }
        } else {
            let x: f64 = s.parse().map_err(|_| SpinError::BadLabel(s.into()))?;
            HalfInt::try_from_f64(x).ok_or(SpinError::InvalidProjection(x))
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(deserializer)?;
        HalfInt::try_from_f64(x).ok_or_else(|| serde::de::Error::custom(format!("{x} is not a half-integer")))
    }
}

/// Validates a spin magnitude.
pub(crate) fn spin_from_f64(j: f64) -> Result<HalfInt, SpinError> {
    match HalfInt::try_from_f64(j) {
        Some(h) if h.0 >= 0 => Ok(h),
        _ => Err(SpinError::InvalidSpin(j)),
    }
}

/// A coupled-basis label `|F, m_F⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateLabel {
    pub f: HalfInt,
    pub m: HalfInt,
}

impl StateLabel {
    pub fn new(f: HalfInt, m: HalfInt) -> Self {
        Self { f, m }
    }

    /// Integer-`F` convenience constructor.
    pub fn fm(f: i32, m: i32) -> Self {
        Self { f: HalfInt(2 * f), m: HalfInt(2 * m) }
    }

    /// The `m → -m` partner.
    pub fn reversed(self) -> Self {
        Self { f: self.f, m: -self.m }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}>", self.f, self.m)
    }
}

impl FromStr for StateLabel {
    type Err = SpinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_start_matches('|').trim_end_matches(['>', '⟩']);
        let (f, m) = t.split_once(',').ok_or_else(|| SpinError::BadLabel(s.into()))?;
        let f: HalfInt = f.parse().map_err(|_| SpinError::BadLabel(s.into()))?;
        let m: HalfInt = m.parse().map_err(|_| SpinError::BadLabel(s.into()))?;
        if f.0 < 0 || m.abs() > f || (f.0 - m.0) % 2 != 0 {
            return Err(SpinError::BadLabel(s.into()));
        }
        Ok(StateLabel { f, m })
    }
}

impl Serialize for StateLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{},{}", self.f, self.m))
    }
}

impl<'de> Deserialize<'de> for StateLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which basis an [`OperatorMatrix`] is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisTag {
    /// `|j, m⟩` of a single angular momentum, `m` descending.
    Spin(HalfInt),
    /// `|m_I, m_J⟩` product basis.
    Uncoupled,
    /// `|F, m_F⟩` coupled basis.
    Coupled,
    /// A subset of coupled-basis F blocks.
    CoupledBlocks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub entries: CMatrix,
    pub basis: BasisTag,
}

impl OperatorMatrix {
    pub fn new(entries: CMatrix, basis: BasisTag) -> Self {
        debug_assert!(entries.is_square());
        Self { entries, basis }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.entries.adjoint(), self.basis)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.entries)
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.entries)
    }

    /// `U† A U`.
    pub fn conjugated_by(&self, u: &OperatorMatrix) -> Result<Self, SpinError> {
        if u.dim() != self.dim() {
            return Err(SpinError::DimensionMismatch(self.dim(), u.dim()));
        }
        Ok(Self::new(u.entries.adjoint() * &self.entries * &u.entries, self.basis))
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> Result<Self, SpinError> {
        if other.dim() != self.dim() {
            return Err(SpinError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(Self::new(linalg::commutator(&self.entries, &other.entries), self.basis))
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        linalg::max_abs(&(&self.entries - &other.entries))
    }
}
