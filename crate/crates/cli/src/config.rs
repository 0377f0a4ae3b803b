//! Experiment descriptors read from JSON.
//!
//! A descriptor names one analysis and carries the sections it needs. Missing
//! sections are filled with the defaults from [`ExperimentConfig::default_for`],
//! so the resolved descriptor written next to every output is complete.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use pdd_core::field_schedule::{ReturnMode, ScheduleConfig, ScheduleKind};
use pdd_core::gate_sim::{GateConfig, GateFrame, MotionState, SpinMotionSystem};
use pdd_core::linalg::CVector;
use pdd_core::pdd_analysis::{FilterOptions, SweepScheme};
use pdd_core::propagator::{real_state, PropagationOptions};
use pdd_core::spin_algebra::{HalfInt, HyperfineSystem, SpeciesTable, StateLabel, ZeemanMode, ZeemanModel};
use pdd_core::units::{khz, mhz};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisKind {
    EchoDemo,
    Filter,
    LeakageSweep,
    ControlError,
    Gate,
    Sensitivity,
}

impl AnalysisKind {
    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::EchoDemo => "echo-demo",
            AnalysisKind::Filter => "filter",
            AnalysisKind::LeakageSweep => "leakage-sweep",
            AnalysisKind::ControlError => "control-error",
            AnalysisKind::Gate => "gate",
            AnalysisKind::Sensitivity => "sensitivity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplitude {
    pub label: StateLabel,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Overlap-defect tolerance of the step-halving loop.
    pub tol: f64,
    /// First step, μs.
    pub dt_init: f64,
    pub max_halvings: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        let p = PropagationOptions::default();
        Self { tol: p.tol, dt_init: p.dt_init, max_halvings: p.max_halvings }
    }
}

impl Tolerances {
    pub fn options(&self) -> PropagationOptions {
        PropagationOptions {
            tol: self.tol,
            dt_init: self.dt_init,
            max_halvings: self.max_halvings,
            ..PropagationOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoSection {
    /// Sampling intervals over `[0, t_f]`; the trajectory has `samples + 1` rows.
    pub samples: usize,
}

impl Default for EchoSection {
    fn default() -> Self {
        Self { samples: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub frequencies_khz: Vec<f64>,
    /// Tone amplitude, G.
    pub b_e: f64,
    pub n_phases: usize,
    pub linearity_tol: f64,
    pub calibration_bound: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterOptions::default();
        Self {
            frequencies_khz: vec![0.0, 0.5, 0.7, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0],
            b_e: f.b_e,
            n_phases: f.n_phases,
            linearity_tol: f.linearity_tol,
            calibration_bound: f.calibration_bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub scheme: SweepScheme,
    /// `B_t` values, G.
    pub b_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub schemes: BTreeMap<String, SweepEntry>,
    /// Leakage below this is treated as numerical noise in the trend fit.
    #[serde(default = "trend_floor")]
    pub trend_floor: f64,
}

fn trend_floor() -> f64 {
    1e-12
}

impl Default for SweepSection {
    fn default() -> Self {
        let mut schemes = BTreeMap::new();
        schemes.insert(
            "pulsed".to_string(),
            SweepEntry {
                scheme: SweepScheme::Pulsed { tau: 10.0, t_center: 50.0, t_f: 100.0, return_mode: ReturnMode::Linear(5.0) },
                b_grid: vec![0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0, 5.6, 8.0, 10.0],
            },
        );
        schemes.insert(
            "continuous".to_string(),
            SweepEntry {
                scheme: SweepScheme::Continuous { omega_r: 2.0 * PI / 10.0, t_f: 100.0 },
                b_grid: vec![0.5, 0.7, 1.0, 1.4, 2.0, 2.5, 2.8, 4.0, 5.6, 8.0, 10.0],
            },
        );
        Self { schemes, trend_floor: trend_floor() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    /// Quasi-static field error, G.
    pub delta_b: f64,
    /// Reversal durations, μs.
    pub t_r: Vec<f64>,
    pub lambda_sq: f64,
    pub pair: [StateLabel; 2],
    /// Bias at which the sensitivity is taken, G.
    pub b0: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            delta_b: 1e-4 * 2.5,
            t_r: vec![3.0, 100.0],
            lambda_sq: 1.0 / 3.0,
            pair: [StateLabel::fm(1, 1), StateLabel::fm(1, -1)],
            b0: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    pub pair: [StateLabel; 2],
    pub b0: f64,
    pub mode: ZeemanMode,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self { pair: [StateLabel::fm(1, -1), StateLabel::fm(1, 1)], b0: 1.0, mode: ZeemanMode::Full }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema")]
    pub schema: u32,
    pub analysis: AnalysisKind,
    /// Stem of the output files; defaults to the analysis name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "ba137")]
    pub species: String,
    /// `F` of the projected block.
    #[serde(default = "one")]
    pub manifold: f64,
    /// `full` propagates the whole hyperfine manifold instead of one block.
    #[serde(default)]
    pub mode: ZeemanMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default = "echo_state")]
    pub initial_state: Vec<Amplitude>,
    /// Leakage is measured out of these states; defaults to `|F, ±F⟩`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Vec<StateLabel>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo_demo: Option<EchoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_error: Option<ControlSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateConfig>,
}

fn schema() -> u32 {
    CONFIG_SCHEMA
}

fn ba137() -> String {
    "ba137".into()
}

fn one() -> f64 {
    1.0
}

fn echo_state() -> Vec<Amplitude> {
    vec![
        Amplitude { label: StateLabel::fm(1, -1), amplitude: (1.0f64 / 3.0).sqrt() },
        Amplitude { label: StateLabel::fm(1, 1), amplitude: (2.0f64 / 3.0).sqrt() },
    ]
}

fn echo_schedule() -> ScheduleConfig {
    ScheduleConfig {
        kind: ScheduleKind::Pulsed { b_t: 10.0, tau: 2.0, t_center: 1.5, t_f: 4.0, return_mode: Some(ReturnMode::Linear(1.0)) },
        noise: Vec::new(),
    }
}

fn filter_schedule() -> ScheduleConfig {
    ScheduleConfig {
        kind: ScheduleKind::Pulsed {
            b_t: 10.0,
            tau: 10.0,
            t_center: 50.0,
            t_f: 100.0,
            return_mode: Some(ReturnMode::Linear(5.0)),
        },
        noise: Vec::new(),
    }
}

pub fn desk_scale_gate() -> GateConfig {
    let sys = SpinMotionSystem::desk_scale();
    GateConfig {
        n_spins: 2,
        spin: 0.5,
        omega_a: mhz(2.0),
        delta: khz(10.0),
        coupling: None,
        zeeman_splitting: sys.zeeman_splitting,
        n_max: sys.fock_cutoff,
        frame: GateFrame::Effective,
        t_gate: None,
        motion: MotionState::Fock(0),
        static_bias: 0.0,
        noise: None,
        tol: None,
        trajectory_samples: 200,
    }
}

impl ExperimentConfig {
    /// Descriptor with every section at its default for `kind`.
    pub fn default_for(kind: AnalysisKind) -> Self {
        let mut c = ExperimentConfig {
            schema: CONFIG_SCHEMA,
            analysis: kind,
            name: None,
            species: ba137(),
            manifold: 1.0,
            mode: ZeemanMode::Projected,
            schedule: None,
            initial_state: echo_state(),
            subspace: None,
            tolerances: Tolerances::default(),
            echo_demo: None,
            filter: None,
            sweep: None,
            control_error: None,
            sensitivity: None,
            gate: None,
        };
        c.fill_defaults();
        c
    }

    /// Parses a descriptor; errors carry the JSON path of the offending field.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config {
            path: ".".into(),
            message: format!("malformed JSON at line {} column {}: {e}", e.line(), e.column()),
        })?;
        if let Some(v) = value.get("schema") {
            if v.as_u64() != Some(u64::from(CONFIG_SCHEMA)) {
                return Err(CliError::Config {
                    path: "schema".into(),
                    message: format!("unsupported schema version {v}, expected {CONFIG_SCHEMA}"),
                });
            }
        }
        let mut c: ExperimentConfig = serde_path_to_error::deserialize(value)
            .map_err(|e| CliError::Config { path: e.path().to_string(), message: e.inner().to_string() })?;
        c.fill_defaults();
        c.check()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn fill_defaults(&mut self) {
        match self.analysis {
            AnalysisKind::EchoDemo => {
                self.schedule.get_or_insert_with(echo_schedule);
                self.echo_demo.get_or_insert_with(EchoSection::default);
            }
            AnalysisKind::Filter => {
                self.schedule.get_or_insert_with(filter_schedule);
                self.filter.get_or_insert_with(FilterSection::default);
            }
            AnalysisKind::LeakageSweep => {
                self.sweep.get_or_insert_with(SweepSection::default);
            }
            AnalysisKind::ControlError => {
                self.control_error.get_or_insert_with(ControlSection::default);
            }
            AnalysisKind::Sensitivity => {
                self.sensitivity.get_or_insert_with(SensitivitySection::default);
            }
            AnalysisKind::Gate => {
                self.gate.get_or_insert_with(desk_scale_gate);
            }
        }
    }

    /// Semantic checks that the parser cannot express.
    pub fn check(&self) -> Result<(), CliError> {
        let table = SpeciesTable::builtin();
        table.get(&self.species).map_err(|e| CliError::config("species", e))?;
        let model = self.model()?;
        self.initial_state()?;
        for s in self.subspace()? {
            model.index_of(s).map_err(|e| CliError::config("subspace", e))?;
        }
        if let Some(s) = &self.schedule {
            s.build().map_err(|e| CliError::config("schedule", e))?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.schemes.is_empty() {
                return Err(CliError::config("sweep.schemes", "at least one scheme is required"));
            }
            for (name, e) in &sweep.schemes {
                if e.b_grid.is_empty() || e.b_grid.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                    return Err(CliError::config(format!("sweep.schemes.{name}.b_grid"), "grid must be non-empty and positive"));
                }
                e.scheme.build(e.b_grid[0]).map_err(|err| CliError::config(format!("sweep.schemes.{name}.scheme"), err))?;
            }
        }
        if let Some(f) = &self.filter {
            if f.frequencies_khz.is_empty() || f.frequencies_khz.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                return Err(CliError::config("filter.frequencies_khz", "grid must be non-empty, finite and non-negative"));
            }
        }
        if let Some(g) = &self.gate {
            g.system().map_err(|e| CliError::config("gate", e))?;
        }
        Ok(())
    }

    pub fn system(&self) -> Result<HyperfineSystem, CliError> {
        SpeciesTable::builtin().system(&self.species).map_err(|e| CliError::config("species", e))
    }

    pub fn manifold(&self) -> Result<HalfInt, CliError> {
        HalfInt::try_from_f64(self.manifold)
            .ok_or_else(|| CliError::config("manifold", format!("{} is not a half-integer", self.manifold)))
    }

    pub fn model(&self) -> Result<ZeemanModel, CliError> {
        let sys = self.system()?;
        match self.mode {
            ZeemanMode::Full => Ok(ZeemanModel::new(&sys, ZeemanMode::Full)),
            ZeemanMode::Projected => {
                ZeemanModel::projected_block(&sys, self.manifold()?).map_err(|e| CliError::config("manifold", e))
            }
        }
    }

    /// The projected block of `manifold`, used for diabatic estimates.
    pub fn block_model(&self) -> Result<ZeemanModel, CliError> {
        ZeemanModel::projected_block(&self.system()?, self.manifold()?).map_err(|e| CliError::config("manifold", e))
    }

    pub fn initial_state_on(&self, model: &ZeemanModel) -> Result<CVector, CliError> {
        let amps: Vec<(StateLabel, f64)> = self.initial_state.iter().map(|a| (a.label, a.amplitude)).collect();
        real_state(model.labels(), &amps).map_err(|e| CliError::config("initial_state", e))
    }

    fn initial_state(&self) -> Result<CVector, CliError> {
        let state = self.initial_state_on(&self.model()?)?;
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(CliError::config("initial_state", format!("amplitudes have norm {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn subspace(&self) -> Result<Vec<StateLabel>, CliError> {
        match &self.subspace {
            Some(s) => Ok(s.clone()),
            None => {
                let f = self.manifold()?;
                Ok(vec![StateLabel::new(f, f), StateLabel::new(f, -f)])
            }
        }
    }

    pub fn stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.analysis.name().replace('-', "_"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_and_round_trip() {
        for kind in [
            AnalysisKind::EchoDemo,
            AnalysisKind::Filter,
            AnalysisKind::LeakageSweep,
            AnalysisKind::ControlError,
            AnalysisKind::Gate,
            AnalysisKind::Sensitivity,
        ] {
            let c = ExperimentConfig::default_for(kind);
            c.check().unwrap();
            let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn errors_name_the_path() {
        let e = ExperimentConfig::from_json(r#"{"analysis":"echo-demo","tolerances":{"tol":"x"}}"#).unwrap_err();
        assert!(matches!(&e, CliError::Config { path, .. } if path == "tolerances.tol"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"analysis":"nope"}"#).unwrap_err();
        assert!(matches!(&e, CliError::Config { path, .. } if path == "analysis"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"analysis":"gate","species":"h1"}"#).unwrap_err();
        assert!(matches!(&e, CliError::Config { path, .. } if path == "species"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"analysis":"filter","extra":1}"#).unwrap_err();
        assert!(matches!(e, CliError::Config { .. }));
        let e = ExperimentConfig::from_json(r#"{"schema":2,"analysis":"filter"}"#).unwrap_err();
        assert!(matches!(&e, CliError::Config { path, .. } if path == "schema"));
    }

    #[test]
    fn unnormalized_state_is_rejected() {
        let text = r#"{"analysis":"echo-demo","initial_state":[{"label":"1,1","amplitude":2.0}]}"#;
        let e = ExperimentConfig::from_json(text).unwrap_err();
        assert!(matches!(&e, CliError::Config { path, .. } if path == "initial_state"), "{e}");
    }
}
