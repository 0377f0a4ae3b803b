use serde::{Deserialize, Serialize};

use super::{propagate_unitary, PropagationError, PropagationOptions};
use crate::field_schedule::FieldSchedule;
use crate::linalg::{CMatrix, CVector, I};
use crate::spin_algebra::{SpinError, StateLabel, ZeemanModel};

/// Deterministic phases and state map of a noise-free reference propagator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// `map[j]` is the output index that input basis state `j` ends up in:
    /// either `j` itself or its `m → −m` partner.
    pub map: Vec<usize>,
    /// Phase of each output basis state, radians.
    pub phases: Vec<f64>,
    /// `max_j (1 − |U[map j, j]|²)`.
    pub off_structure_weight: f64,
    /// Step of the reference run, μs; noisy runs reuse it.
    pub dt: f64,
}

impl Calibration {
    /// Image of `psi0` under the map, without phases.
    pub fn target(&self, psi0: &CVector) -> CVector {
        let mut t = CVector::zeros(psi0.len());
        for (j, &i) in self.map.iter().enumerate() {
            t[i] = psi0[j];
        }
        t
    }

    /// Whether any state changes label.
    pub fn is_reversal(&self) -> bool {
        self.map.iter().enumerate().any(|(j, &i)| i != j)
    }

    /// Removes the calibrated phases from a state.
    pub fn remove_phases(&self, psi: &CVector) -> CVector {
        CVector::from_iterator(psi.len(), psi.iter().zip(&self.phases).map(|(z, &p)| z * (-I * p).exp()))
    }
}

/// Extracts the map and phases from a reference propagator.
pub fn calibrate_unitary(
    u: &CMatrix,
    labels: &[StateLabel],
    leakage_bound: f64,
    dt: f64,
) -> Result<Calibration, PropagationError> {
    let n = labels.len();
    if u.nrows() != n || u.ncols() != n {
        return Err(PropagationError::DimensionMismatch { state: n, hamiltonian: u.nrows() });
    }
    let mut map = vec![0; n];
    let mut phases = vec![0.0; n];
    let mut weight: f64 = 0.0;
    for (j, l) in labels.iter().enumerate() {
        let partner = labels.iter().position(|x| *x == l.reversed()).unwrap_or(j);
        let i = if u[(partner, j)].norm_sqr() > u[(j, j)].norm_sqr() { partner } else { j };
        map[j] = i;
        weight = weight.max(1.0 - u[(i, j)].norm_sqr());
    }
    let mut seen = vec![false; n];
    for &i in &map {
        if seen[i] {
            return Err(PropagationError::Calibration { weight: 1.0, bound: leakage_bound });
        }
        seen[i] = true;
    }
    if weight > leakage_bound {
        return Err(PropagationError::Calibration { weight, bound: leakage_bound });
    }
    for (j, &i) in map.iter().enumerate() {
        phases[i] = u[(i, j)].arg();
    }
    Ok(Calibration { map, phases, off_structure_weight: weight, dt })
}

/// Propagates the noise-free schedule and calibrates its phases.
pub fn calibrate_phases(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    opts: &PropagationOptions,
    leakage_bound: f64,
) -> Result<Calibration, PropagationError> {
    let reference = schedule.noise_free();
    let u = propagate_unitary(model, &reference, opts)?;
    calibrate_unitary(&u.unitary, model.labels(), leakage_bound, u.dt)
}

/// `1 − Σ_{s ∈ subspace} |⟨s|ψ⟩|²`.
pub fn leakage(psi: &CVector, labels: &[StateLabel], subspace: &[StateLabel]) -> Result<f64, SpinError> {
    if subspace.is_empty() {
        return Err(SpinError::BadLabel("empty subspace".into()));
    }
    let mut kept = 0.0;
    for s in subspace {
        let k = labels.iter().position(|l| l == s).ok_or(SpinError::UnknownLabel(*s))?;
        kept += psi[k].norm_sqr();
    }
    Ok((1.0 - kept / psi.norm_squared()).clamp(0.0, 1.0))
}

/// Worst-case leakage out of the subspace over subspace input states.
pub fn leakage_unitary(u: &CMatrix, labels: &[StateLabel], subspace: &[StateLabel]) -> Result<f64, SpinError> {
    let mut worst: f64 = 0.0;
    for s in subspace {
        let j = labels.iter().position(|l| l == s).ok_or(SpinError::UnknownLabel(*s))?;
        worst = worst.max(leakage(&u.column(j).into_owned(), labels, subspace)?);
    }
    Ok(worst)
}

/// `|⟨T|ψ'⟩|²` where `ψ'` has the calibrated phases removed.
pub fn fidelity(psi: &CVector, target: &CVector, calibration: Option<&Calibration>) -> f64 {
    let corrected = match calibration {
        Some(cal) => cal.remove_phases(psi),
        None => psi.clone(),
    };
    let overlap = target.dotc(&corrected);
    (overlap.norm_sqr() / (target.norm_squared() * corrected.norm_squared())).clamp(0.0, 1.0)
}
