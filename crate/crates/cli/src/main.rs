//! `pdd`: command-line front end for the reversal analyses.

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdd_core::spin_algebra::StateLabel;
use serde_json::json;

use crate::commands::Overrides;
use crate::config::{AnalysisKind, ExperimentConfig};
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Parser, Debug)]
#[command(name = "pdd", version, about = "Field-reversal simulations for trapped-ion hyperfine qubits")]
struct Cli {
    /// Directory for result files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps and phase averages; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Recorded in the outputs. Nothing in the pipeline is stochastic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Experiment descriptor (JSON). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RequiredConfig {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run whatever analysis the descriptor names.
    Run(RequiredConfig),
    /// Populations through one field reversal.
    EchoDemo(ConfigArg),
    /// Noise filter function of a schedule.
    Filter(ConfigArg),
    /// Leakage out of the stretched pair against field magnitude.
    LeakageSweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Only run the named scheme.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Infidelity from a quasi-static field error.
    ControlError {
        #[command(flatten)]
        config: ConfigArg,
        /// Qubit pair `A B`, each written `F,m`.
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
        pair: Option<Vec<StateLabel>>,
    },
    /// Geometric phase gate with a rotating quantization axis.
    Gate(ConfigArg),
    /// Field sensitivity of a transition.
    Sensitivity {
        #[command(flatten)]
        config: ConfigArg,
        /// Transition `A B`, each written `F,m`.
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
        pair: Option<Vec<StateLabel>>,
        /// Bias field, G.
        #[arg(long)]
        b0: Option<f64>,
    },
    /// Check a descriptor and estimate diabatic leakage without running it.
    Validate(RequiredConfig),
    /// Print the default descriptor for an analysis.
    Defaults {
        #[arg(value_enum)]
        analysis: AnalysisKind,
    },
}

fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

fn load(path: Option<&Path>, kind: Option<AnalysisKind>) -> Result<ExperimentConfig, CliError> {
    let cfg = match path {
        Some(p) => ExperimentConfig::from_json(&read_config(p)?)?,
        None => ExperimentConfig::default_for(kind.expect("subcommand names an analysis")),
    };
    if let Some(k) = kind {
        if cfg.analysis != k {
            return Err(CliError::config(
                "analysis",
                format!("descriptor is for `{}` but the subcommand is `{}`", cfg.analysis.name(), k.name()),
            ));
        }
    }
    Ok(cfg)
}

fn pair(p: Option<Vec<StateLabel>>) -> Option<[StateLabel; 2]> {
    p.map(|v| [v[0], v[1]])
}

fn execute(cli: Cli) -> Result<serde_json::Value, CliError> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    }
    let mut overrides = Overrides::default();
    let (path, kind) = match cli.command {
        Command::Defaults { analysis } => {
            return Ok(serde_json::from_str(&ExperimentConfig::default_for(analysis).to_json()).expect("round trip"));
        }
        Command::Validate(c) => {
            let text = read_config(&c.config).map_err(|e| e.to_string());
            return Ok(commands::validate(text));
        }
        Command::Run(c) => (Some(c.config), None),
        Command::EchoDemo(c) => (c.config, Some(AnalysisKind::EchoDemo)),
        Command::Filter(c) => (c.config, Some(AnalysisKind::Filter)),
        Command::Gate(c) => (c.config, Some(AnalysisKind::Gate)),
        Command::LeakageSweep { config, scheme } => {
            overrides.scheme = scheme;
            (config.config, Some(AnalysisKind::LeakageSweep))
        }
        Command::ControlError { config, pair: p } => {
            overrides.pair = pair(p);
            (config.config, Some(AnalysisKind::ControlError))
        }
        Command::Sensitivity { config, pair: p, b0 } => {
            overrides.pair = pair(p);
            let mut cfg = load(config.config.as_deref(), Some(AnalysisKind::Sensitivity))?;
            if let Some(b0) = b0 {
                cfg.sensitivity.as_mut().expect("filled").b0 = b0;
            }
            return finish(cfg, &overrides, &cli.out, cli.seed);
        }
    };
    let cfg = load(path.as_deref(), kind)?;
    finish(cfg, &overrides, &cli.out, cli.seed)
}

fn finish(
    mut cfg: ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
    seed: Option<u64>,
) -> Result<serde_json::Value, CliError> {
    commands::apply_overrides(&mut cfg, overrides)?;
    let mut dir = OutputDir::create(out, &cfg, seed)?;
    let summary = commands::run(&cfg, &mut dir)?;
    let files: Vec<String> = dir.written().iter().map(|p| p.display().to_string()).collect();
    Ok(json!({ "analysis": cfg.analysis, "files": files, "summary": summary }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(v) => {
            // A closed pipe on stdout is not an error of the run.
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&v).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
