//! Figures of merit for decoupling schedules: memory infidelity under a
//! single noise tone, the filter response built from it, leakage sweeps,
//! diabatic estimates, and the control-error budget.

mod filter;
mod magnus;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field_schedule::{FieldSchedule, ScheduleError};
use crate::linalg::CVector;
use crate::propagator::{leakage, propagate, PropagationError, PropagationOptions};
use crate::spin_algebra::{HyperfineSystem, SpinError, StateLabel, ZeemanMode, ZeemanModel};

pub use filter::{filter_response, memory_infidelity, FilterCurve, FilterOptions, LinearityCheck, SchemeTag};
pub use magnus::{magnus_diabatic_estimate, MagnusEstimate};
pub use sweep::{leakage_sweep, leakage_trend, SweepPoint, SweepScheme, TrendReport};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("field angle rate is discontinuous; the Magnus estimate needs a C1 angle profile")]
    NotSmooth,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("response is not quadratic at omega = {omega}: S = {s_full} at B_e, {s_half} at B_e/2")]
    Linearity { omega: f64, s_full: f64, s_half: f64 },
    #[error("states {0} and {1} have the same label")]
    DegenerateLabels(StateLabel, StateLabel),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Spin(#[from] SpinError),
}

/// Field sensitivity `∂(E_a − E_b)/∂B` of a transition along `z` at `b0`,
/// rad/(μs·G), by central difference with step `1e-3` G.
///
/// In `Full` mode eigenstates are followed by their overlap with the coupled
/// basis states, so `b0` must be well inside the weak-field regime.
pub fn qubit_sensitivity(
    sys: &HyperfineSystem,
    a: StateLabel,
    b: StateLabel,
    b0: f64,
    mode: ZeemanMode,
) -> Result<f64, AnalysisError> {
    if a == b {
        return Err(AnalysisError::DegenerateLabels(a, b));
    }
    let model = ZeemanModel::new(sys, mode);
    let (ia, ib) = (model.index_of(a)?, model.index_of(b)?);
    let h = 1e-3;
    let splitting = |field: f64| -> f64 {
        let hm = model.hamiltonian([0.0, 0.0, field]);
        match mode {
            ZeemanMode::Projected => hm[(ia, ia)].re - hm[(ib, ib)].re,
            ZeemanMode::Full => {
                let eig = hm.symmetric_eigen();
                let level = |i: usize| {
                    let k = (0..eig.eigenvalues.len())
                        .max_by(|&p, &q| eig.eigenvectors[(i, p)].norm_sqr().total_cmp(&eig.eigenvectors[(i, q)].norm_sqr()))
                        .expect("non-empty");
                    eig.eigenvalues[k]
                };
                level(ia) - level(ib)
            }
        }
    };
    Ok((splitting(b0 + h) - splitting(b0 - h)) / (2.0 * h))
}

/// Quasi-static field-error infidelity of a reversal of length `t_r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlError {
    /// `λ² (δB · sensitivity · t_r)²`.
    pub infidelity: f64,
    /// Above 0.1 the quadratic expansion no longer holds.
    pub outside_taylor_regime: bool,
}

/// `λ² (δB · ∂ω/∂B · t_r)²`; `λ² = 1/3` averages a random field direction.
pub fn control_error_infidelity(delta_b: f64, sensitivity: f64, t_r: f64, lambda_sq: f64) -> Result<ControlError, AnalysisError> {
    for (name, v) in [("delta_b", delta_b), ("sensitivity", sensitivity), ("t_r", t_r), ("lambda_sq", lambda_sq)] {
        if !v.is_finite() {
            return Err(AnalysisError::InvalidParameter(format!("{name} must be finite, got {v}")));
        }
    }
    if t_r < 0.0 || lambda_sq < 0.0 {
        return Err(AnalysisError::InvalidParameter("t_r and lambda_sq must be non-negative".into()));
    }
    let phase = delta_b * sensitivity * t_r;
    let infidelity = lambda_sq * phase * phase;
    Ok(ControlError { infidelity, outside_taylor_regime: infidelity > 0.1 })
}

/// Error contributions of one schedule, each as an infidelity or phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Propagated population outside the target subspace.
    pub leakage: f64,
    /// First-order Magnus prediction of the same, if the angle profile is C1.
    pub leakage_estimate: Option<f64>,
    /// Second-order Magnus `θ_z`, rad.
    pub ac_zeeman_shift: Option<f64>,
    pub control_error: ControlError,
}

/// Collects leakage, diabatic terms and control error for `psi0` under a
/// schedule. `model` must be a single projected block.
pub fn error_budget(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    psi0: &CVector,
    subspace: &[StateLabel],
    opts: &PropagationOptions,
    control: ControlError,
) -> Result<ErrorBudget, AnalysisError> {
    let gamma = model
        .gyromagnetic_ratio()
        .ok_or_else(|| AnalysisError::InvalidParameter("error budget needs a single projected F block".into()))?;
    let run = propagate(model, &schedule.noise_free(), psi0, opts)?;
    let leak = leakage(&run.final_state.amplitudes, model.labels(), subspace)?;
    let (leakage_estimate, ac_zeeman_shift) = match magnus_diabatic_estimate(schedule, gamma) {
        Ok(m) => (Some(m.leakage_estimate(model, psi0, subspace)?), Some(m.jz_shift)),
        Err(AnalysisError::NotSmooth) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(ErrorBudget { leakage: leak, leakage_estimate, ac_zeeman_shift, control_error: control })
}
