use std::io::Write;

use pdd_core::gate_sim::{all_plus_state, simulate_gate};
use pdd_core::pdd_analysis::{
    control_error_infidelity, filter_response, leakage_sweep, leakage_trend, magnus_diabatic_estimate, qubit_sensitivity,
    AnalysisError, FilterOptions,
};
use pdd_core::propagator::{leakage, propagate};
use pdd_core::spin_algebra::StateLabel;
use pdd_core::units::{khz, BOHR_MAGNETON_MHZ_PER_GAUSS};
use serde_json::{json, Value};

use crate::config::{AnalysisKind, ExperimentConfig};
use crate::error::CliError;
use crate::output::OutputDir;

/// Predicted leakage above which `validate` warns.
pub const DIABATIC_WARNING: f64 = 1e-3;

/// Flags that override parts of a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scheme: Option<String>,
    pub pair: Option<[StateLabel; 2]>,
}

/// Folds command-line overrides into the descriptor.
pub fn apply_overrides(cfg: &mut ExperimentConfig, overrides: &Overrides) -> Result<(), CliError> {
    if let Some(pair) = overrides.pair {
        match cfg.analysis {
            AnalysisKind::Sensitivity => cfg.sensitivity.as_mut().expect("filled").pair = pair,
            AnalysisKind::ControlError => cfg.control_error.as_mut().expect("filled").pair = pair,
            _ => return Err(CliError::config("pair", "--pair applies to sensitivity and control-error")),
        }
    }
    if let Some(name) = &overrides.scheme {
        let sweep = cfg.sweep.as_mut().ok_or_else(|| CliError::config("scheme", "--scheme applies to leakage-sweep"))?;
        if !sweep.schemes.contains_key(name) {
            let known: Vec<_> = sweep.schemes.keys().cloned().collect();
            return Err(CliError::config("sweep.schemes", format!("no scheme `{name}`; config has {known:?}")));
        }
        sweep.schemes.retain(|k, _| k == name);
    }
    Ok(())
}

/// Runs the analysis, writes its files and returns a short summary.
pub fn run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    match cfg.analysis {
        AnalysisKind::EchoDemo => echo_demo(cfg, out),
        AnalysisKind::Filter => filter(cfg, out),
        AnalysisKind::LeakageSweep => sweep(cfg, out),
        AnalysisKind::ControlError => control_error(cfg, out),
        AnalysisKind::Gate => gate(cfg, out),
        AnalysisKind::Sensitivity => sensitivity(cfg, out),
    }
}

fn echo_demo(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let model = cfg.model()?;
    let schedule = cfg.schedule.as_ref().expect("filled").build().map_err(|e| CliError::config("schedule", e))?;
    let psi0 = cfg.initial_state_on(&model)?;
    let subspace = cfg.subspace()?;
    let t_f = schedule.duration();
    let samples = cfg.echo_demo.as_ref().expect("filled").samples;
    let opts = cfg.tolerances.options().with_uniform_samples(t_f, samples);
    let run = propagate(&model, &schedule, &psi0, &opts)?;
    let leak = leakage(&run.final_state.amplitudes, model.labels(), &subspace).map_err(|e| CliError::config("subspace", e))?;

    let final_pops = run.final_state.populations();
    let mut populations = Vec::new();
    for (k, label) in model.labels().iter().enumerate() {
        let (t_peak, peak) = run
            .trajectory
            .iter()
            .map(|s| (s.time, s.populations()[k]))
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        populations.push(json!({ "label": label, "final": final_pops[k], "peak": peak, "peak_time_us": t_peak }));
    }
    let estimate = predicted_leakage(cfg, &schedule)?;

    let stem = cfg.stem();
    let labels = model.labels().to_vec();
    out.csv(&format!("{stem}_trajectory.csv"), |w| run.write_trajectory_csv(w, &labels).map_err(std::io::Error::other))?;
    let result = json!({
        "populations": populations,
        "leakage": leak,
        "magnus_leakage_estimate": estimate,
        "norm_drift": run.norm_drift,
        "dt_us": run.dt,
        "steps": run.step_count,
        "convergence_defect": run.convergence_defect,
    });
    out.json(&format!("{stem}.json"), result.clone())?;
    Ok(json!({ "leakage": leak }))
}

fn filter(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let model = cfg.model()?;
    let schedule = cfg.schedule.as_ref().expect("filled").build().map_err(|e| CliError::config("schedule", e))?;
    let psi0 = cfg.initial_state_on(&model)?;
    let f = cfg.filter.as_ref().expect("filled");
    let fopts = FilterOptions {
        b_e: f.b_e,
        n_phases: f.n_phases,
        linearity_tol: f.linearity_tol,
        calibration_bound: f.calibration_bound,
        propagation: cfg.tolerances.options(),
        ..FilterOptions::default()
    };
    let grid: Vec<f64> = f.frequencies_khz.iter().map(|k| khz(*k)).collect();
    let curve = filter_response(&model, &schedule, &psi0, &grid, &fopts)?;
    let stem = cfg.stem();
    out.csv(&format!("{stem}.csv"), |w| curve.write_csv(w))?;
    let result = json!({
        "scheme": curve.scheme,
        "frequencies_khz": f.frequencies_khz,
        "s_per_g2": curve.s_values,
        "b_e": curve.b_e,
        "n_phases": curve.n_phases,
        "baseline": curve.baseline,
        "clamped": curve.clamped,
        "calibration_dt_us": curve.calibration_dt,
        "linearity": curve.linearity,
    });
    out.json(&format!("{stem}.json"), result)?;
    Ok(json!({ "points": curve.s_values.len(), "linearity_deviation": curve.linearity.relative_deviation }))
}

fn sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let model = cfg.model()?;
    let psi0 = cfg.initial_state_on(&model)?;
    let subspace = cfg.subspace()?;
    let section = cfg.sweep.as_ref().expect("filled");
    let opts = cfg.tolerances.options();
    let stem = cfg.stem();
    let mut results = serde_json::Map::new();
    for (name, entry) in &section.schemes {
        let points = leakage_sweep(&model, &entry.scheme, &entry.b_grid, &psi0, &subspace, &opts);
        let trend = leakage_trend(&points, section.trend_floor);
        out.csv(&format!("{stem}_{name}.csv"), |w| {
            writeln!(w, "B_t_G,leakage,error")?;
            for p in &points {
                let l = p.leakage.map_or(String::new(), |l| format!("{l:.9e}"));
                let e = p.error.as_deref().unwrap_or("").replace(['"', ','], ";");
                writeln!(w, "{},{l},{e}", p.b_t)?;
            }
            Ok(())
        })?;
        let failed = points.iter().filter(|p| p.error.is_some()).count();
        results.insert(name.clone(), json!({ "points": points, "trend": trend, "failed_points": failed }));
    }
    out.json(&format!("{stem}.json"), Value::Object(results.clone()))?;
    Ok(Value::Object(results.into_iter().map(|(k, v)| (k, v["trend"].clone())).collect()))
}

fn control_error(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let sys = cfg.system()?;
    let c = cfg.control_error.as_ref().expect("filled");
    let s = qubit_sensitivity(&sys, c.pair[0], c.pair[1], c.b0, cfg.mode).map_err(|e| pair_error("control_error.pair", e))?;
    let mut rows = Vec::new();
    for &t_r in &c.t_r {
        let e = control_error_infidelity(c.delta_b, s, t_r, c.lambda_sq)?;
        rows.push(json!({ "t_r_us": t_r, "infidelity": e.infidelity, "outside_taylor_regime": e.outside_taylor_regime }));
    }
    let result = json!({ "sensitivity_rad_per_us_per_g": s, "delta_b_g": c.delta_b, "lambda_sq": c.lambda_sq, "budget": rows });
    out.json(&format!("{}.json", cfg.stem()), result.clone())?;
    Ok(result)
}

fn sensitivity(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let sys = cfg.system()?;
    let sec = cfg.sensitivity.as_ref().expect("filled");
    let s = qubit_sensitivity(&sys, sec.pair[0], sec.pair[1], sec.b0, sec.mode).map_err(|e| pair_error("sensitivity.pair", e))?;
    let mhz = s / (2.0 * std::f64::consts::PI);
    let result = json!({
        "pair": sec.pair,
        "b0_g": sec.b0,
        "sensitivity_rad_per_us_per_g": s,
        "sensitivity_mhz_per_g": mhz,
        "in_bohr_magnetons": mhz / BOHR_MAGNETON_MHZ_PER_GAUSS,
    });
    out.json(&format!("{}.json", cfg.stem()), result.clone())?;
    Ok(result)
}

fn gate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let g = cfg.gate.as_ref().expect("filled");
    let sys = g.system()?;
    let psi = all_plus_state(&sys);
    let r = simulate_gate(&sys, g.frame, &psi, g.motion, g.gate_time(), &g.options())?;
    let stem = cfg.stem();
    out.csv(&format!("{stem}_phase_space.csv"), |w| r.write_phase_space_csv(w))?;
    let value = serde_json::to_value(&r).expect("gate result serializes");
    out.json(&format!("{stem}.json"), value)?;
    Ok(json!({
        "bell_fidelity": r.bell_fidelity,
        "residual_spin_motion_entanglement": r.residual_spin_motion_entanglement,
        "geometric_phase": r.geometric_phase,
    }))
}

fn pair_error(path: &str, e: AnalysisError) -> CliError {
    match e {
        AnalysisError::DegenerateLabels(..) | AnalysisError::Spin(_) => CliError::config(path, e),
        other => other.into(),
    }
}

/// Dressed first-order leakage estimate for a schedule on the configured
/// block, or `None` when the angle rate is not continuous.
pub fn predicted_leakage(
    cfg: &ExperimentConfig,
    schedule: &pdd_core::field_schedule::FieldSchedule,
) -> Result<Option<f64>, CliError> {
    let block = cfg.block_model()?;
    let gamma = block.gyromagnetic_ratio().expect("projected block has a single ratio");
    match magnus_diabatic_estimate(&schedule.noise_free(), gamma) {
        Ok(m) => {
            let psi = cfg.initial_state_on(&block)?;
            Ok(Some(m.leakage_estimate(&block, &psi, &cfg.subspace()?)?))
        }
        Err(AnalysisError::NotSmooth) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Schema check plus an adiabaticity pre-flight. Never fails; problems are
/// listed in the report.
pub fn validate(text: Result<String, String>) -> Value {
    let text = match text {
        Ok(t) => t,
        Err(msg) => {
            return json!({ "valid": false, "errors": [{ "path": ".", "message": msg }], "warnings": [], "preflight": [] })
        }
    };
    let cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(CliError::Config { path, message }) => {
            return json!({ "valid": false, "errors": [{ "path": path, "message": message }], "warnings": [], "preflight": [] })
        }
        Err(e) => {
            return json!({ "valid": false, "errors": [{ "path": ".", "message": e.to_string() }], "warnings": [], "preflight": [] })
        }
    };
    let mut targets = Vec::new();
    if let Some(s) = &cfg.schedule {
        targets.push(("schedule".to_string(), s.build()));
    }
    if let Some(sw) = &cfg.sweep {
        for (name, e) in &sw.schemes {
            // The weakest field is the least adiabatic point of the sweep.
            let b = e.b_grid.iter().copied().fold(f64::INFINITY, f64::min);
            targets.push((
                format!("sweep.schemes.{name} at B_t = {b} G"),
                e.scheme.build(b).map_err(|err| match err {
                    AnalysisError::Schedule(s) => s,
                    other => pdd_core::field_schedule::ScheduleError::InvalidParameter(other.to_string()),
                }),
            ));
        }
    }
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut preflight = Vec::new();
    for (what, built) in targets {
        let schedule = match built {
            Ok(s) => s,
            Err(e) => {
                errors.push(json!({ "path": what, "message": e.to_string() }));
                continue;
            }
        };
        match predicted_leakage(&cfg, &schedule) {
            Ok(Some(l)) => {
                if l > DIABATIC_WARNING {
                    warnings.push(format!("{what}: predicted leakage {l:.2e} exceeds {DIABATIC_WARNING:e}; diabatic regime"));
                }
                preflight.push(json!({ "target": what, "predicted_leakage": l }));
            }
            Ok(None) => preflight
                .push(json!({ "target": what, "predicted_leakage": null, "note": "angle rate is discontinuous; no estimate" })),
            Err(e) => errors.push(json!({ "path": what, "message": e.to_string() })),
        }
    }
    json!({
        "valid": errors.is_empty(),
        "analysis": cfg.analysis,
        "errors": errors,
        "warnings": warnings,
        "preflight": preflight,
        "config": cfg,
    })
}
