use std::fmt::Display;

use pdd_core::gate_sim::GateError;
use pdd_core::pdd_analysis::AnalysisError;
use pdd_core::propagator::PropagationError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("numerical convergence failure: {0}")]
    Convergence(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Display) -> Self {
        CliError::Config { path: path.into(), message: message.to_string() }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Convergence(_) => 3,
            _ => 1,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        let (kind, path) = match self {
            CliError::Config { path, .. } => ("config", Some(path.clone())),
            CliError::Convergence(_) => ("convergence", None),
            CliError::Io { .. } => ("io", None),
            CliError::Runtime(_) => ("runtime", None),
        };
        let mut e = json!({ "kind": kind, "message": self.to_string(), "exit_code": self.exit_code() });
        if let Some(p) = path {
            e["path"] = json!(p);
        }
        json!({ "error": e }).to_string()
    }
}

impl From<PropagationError> for CliError {
    fn from(e: PropagationError) -> Self {
        match e {
            PropagationError::NonConvergence { .. } | PropagationError::NonFinite(_) => CliError::Convergence(e.to_string()),
            PropagationError::Calibration { .. } => CliError::Convergence(e.to_string()),
            PropagationError::Schedule(s) => CliError::config("schedule", s),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Propagation(p) => p.into(),
            AnalysisError::Linearity { .. } => CliError::Convergence(e.to_string()),
            AnalysisError::InvalidParameter(m) => CliError::Config { path: ".".into(), message: m },
            AnalysisError::Schedule(s) => CliError::config("schedule", s),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<GateError> for CliError {
    fn from(e: GateError) -> Self {
        match e {
            GateError::Truncation { .. } => CliError::Convergence(e.to_string()),
            GateError::Propagation(p) => p.into(),
            GateError::Config { path, message } => CliError::Config { path: format!("gate.{path}"), message },
            GateError::InvalidParameter(m) => CliError::config("gate", m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
