//! Named species presets loaded from a versioned TOML table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HyperfineSystem, SpinError};
use crate::units::ghz;

/// The table shipped with the crate.
pub const BUILTIN_SPECIES: &str = include_str!("../../data/species.toml");

const SUPPORTED_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesPreset {
    #[serde(default)]
    pub description: String,
    pub nuclear_spin: f64,
    pub electron_spin: f64,
    /// `A/2π` in GHz.
    pub hyperfine_a_ghz: f64,
    pub g_j: f64,
    #[serde(default)]
    pub g_i: f64,
}

impl SpeciesPreset {
    pub fn system(&self) -> Result<HyperfineSystem, SpinError> {
        HyperfineSystem::new(self.nuclear_spin, self.electron_spin, ghz(self.hyperfine_a_ghz), self.g_j, self.g_i)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesTable {
    pub schema: u32,
    pub species: BTreeMap<String, SpeciesPreset>,
}

impl SpeciesTable {
    pub fn parse(text: &str) -> Result<Self, SpinError> {
        let table: SpeciesTable = toml::from_str(text).map_err(|e| SpinError::SpeciesTable(e.to_string()))?;
        if table.schema != SUPPORTED_SCHEMA {
            return Err(SpinError::SpeciesTable(format!("unsupported schema version {}", table.schema)));
        }
        Ok(table)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SPECIES).expect("bundled species table is valid")
    }

    pub fn load(path: &Path) -> Result<Self, SpinError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpinError::SpeciesTable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, name: &str) -> Result<&SpeciesPreset, SpinError> {
        self.species.get(name).ok_or_else(|| SpinError::UnknownSpecies(name.to_string()))
    }

    pub fn system(&self, name: &str) -> Result<HyperfineSystem, SpinError> {
        self.get(name)?.system()
    }
}

impl HyperfineSystem {
    /// Looks a preset up in the bundled table.
    pub fn preset(name: &str) -> Result<Self, SpinError> {
        SpeciesTable::builtin().system(name)
    }

    /// ¹³⁷Ba⁺ ground manifold.
    pub fn barium_137() -> Self {
        Self::preset("ba137").expect("ba137 is bundled")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_algebra::{hyperfine_hamiltonian, HalfInt};

    #[test]
    fn builtin_table_loads() {
        let t = SpeciesTable::builtin();
        let ba = t.get("ba137").unwrap();
        assert_eq!(ba.nuclear_spin, 1.5);
        assert!(matches!(t.get("nope"), Err(SpinError::UnknownSpecies(_))));
    }

    #[test]
    fn ba137_splitting_is_the_clock_frequency() {
        let sys = HyperfineSystem::barium_137();
        let e = hyperfine_hamiltonian(&sys, 0.0).entries.symmetric_eigen().eigenvalues;
        let spread = e.max() - e.min();
        assert!((spread / ghz(1.0) - 8.037741667).abs() < 1e-9);
        assert_eq!(sys.f_values(), vec![HalfInt::from_doubled(4), HalfInt::from_doubled(2)]);
    }

    #[test]
    fn rejects_unknown_schema_and_keys() {
        assert!(SpeciesTable::parse("schema = 2\n[species]\n").is_err());
        let bad = "schema = 1\n[species.x]\nnuclear_spin = 0.5\nelectron_spin = 0.5\nhyperfine_a_ghz = 1\ng_j = 2\ncolour = 3\n";
        assert!(SpeciesTable::parse(bad).is_err());
    }
}
