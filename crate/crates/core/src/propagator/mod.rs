//! Time-ordered propagation of `i dψ/dt = H(t) ψ`.
//!
//! Each step applies `exp(−i H(t + dt/2) dt)` (exponential midpoint rule,
//! second order and exactly unitary up to rounding). Step size is chosen by
//! global halving: the whole interval is integrated at `dt` and `dt/2` and
//! the finer result is accepted once the two agree to `tol` in overlap
//! defect `1 − |⟨A|B⟩|²/(‖A‖²‖B‖²)`.

mod calibration;

use std::io::Write;

use thiserror::Error;

use crate::field_schedule::{FieldSchedule, ScheduleError};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::spin_algebra::{SpinError, StateLabel, ZeemanModel};

pub use calibration::{calibrate_phases, calibrate_unitary, fidelity, leakage, leakage_unitary, Calibration};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("step halving did not converge after {halvings} halvings (overlap defect {defect:.3e}, dt {dt:.3e} μs)")]
    NonConvergence { halvings: u32, defect: f64, dt: f64 },
    #[error("Hamiltonian is not finite at t = {0} μs")]
    NonFinite(f64),
    #[error("initial state has norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("duration must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("state dimension {state} does not match Hamiltonian dimension {hamiltonian}")]
    DimensionMismatch { state: usize, hamiltonian: usize },
    #[error("reference propagator is not a PDD map: off-structure weight {weight:.3e} exceeds {bound:.3e}")]
    Calibration { weight: f64, bound: f64 },
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("csv export failed: {0}")]
    Csv(String),
}

/// A time-dependent Hermitian generator in rad/μs.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> CMatrix;
}

/// A [`ZeemanModel`] driven by a [`FieldSchedule`].
#[derive(Clone, Copy, Debug)]
pub struct ScheduleHamiltonian<'a> {
    pub model: &'a ZeemanModel,
    pub schedule: &'a FieldSchedule,
}

impl<'a> ScheduleHamiltonian<'a> {
    pub fn new(model: &'a ZeemanModel, schedule: &'a FieldSchedule) -> Self {
        Self { model, schedule }
    }
}

impl Hamiltonian for ScheduleHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn at(&self, t: f64) -> CMatrix {
        self.model.hamiltonian(self.schedule.field(t))
    }
}

/// A Hamiltonian given by a closure.
pub struct FnHamiltonian<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> CMatrix + Sync> FnHamiltonian<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64) -> CMatrix + Sync> Hamiltonian for FnHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn at(&self, t: f64) -> CMatrix {
        (self.f)(t)
    }
}

/// How each step exponential is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExpMethod {
    /// Eigendecomposition up to dimension 16, Taylor action above.
    #[default]
    Auto,
    Eigen,
    /// Apply the exponential to the state block by a Taylor series.
    Taylor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationOptions {
    /// Initial step, μs.
    pub dt_init: f64,
    /// Overlap-defect tolerance between the `dt` and `dt/2` runs.
    pub tol: f64,
    pub max_halvings: u32,
    pub exp_method: ExpMethod,
    /// Times at which to record the state; need not align with steps.
    pub sample_times: Vec<f64>,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { dt_init: 0.01, tol: 1e-10, max_halvings: 12, exp_method: ExpMethod::Auto, sample_times: Vec::new() }
    }
}

impl PropagationOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt_init = dt;
        self
    }

    pub fn with_samples(mut self, times: Vec<f64>) -> Self {
        self.sample_times = times;
        self
    }

    /// `n + 1` uniformly spaced sample times over `[0, t_f]`.
    pub fn with_uniform_samples(self, t_f: f64, n: usize) -> Self {
        let n = n.max(1);
        self.with_samples((0..=n).map(|k| t_f * k as f64 / n as f64).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub amplitudes: CVector,
    /// μs.
    pub time: f64,
}

impl QuantumState {
    pub fn new(amplitudes: CVector, time: f64) -> Self {
        Self { amplitudes, time }
    }

    /// Builds a state from `(label, amplitude)` pairs over `labels`.
    pub fn from_labels(labels: &[StateLabel], amps: &[(StateLabel, linalg::C64)]) -> Result<Self, SpinError> {
        let mut v = CVector::zeros(labels.len());
        for (l, a) in amps {
            let k = labels.iter().position(|x| x == l).ok_or(SpinError::UnknownLabel(*l))?;
            v[k] += *a;
        }
        Ok(Self::new(v, 0.0))
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    pub final_state: QuantumState,
    /// States at the requested sample times.
    pub trajectory: Vec<QuantumState>,
    /// `|‖ψ(t_f)‖ − 1|`.
    pub norm_drift: f64,
    pub step_count: usize,
    /// Step of the accepted run, μs.
    pub dt: f64,
    /// Overlap defect between the accepted run and the one before it.
    pub convergence_defect: f64,
}

impl PropagationResult {
    /// Trajectory as CSV: `t`, then `|amplitude|²` per basis label.
    pub fn write_trajectory_csv<W: Write>(&self, out: W, labels: &[StateLabel]) -> Result<(), PropagationError> {
        let err = |e: csv::Error| PropagationError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(labels.iter().map(|l| l.to_string()));
        w.write_record(&header).map_err(err)?;
        for s in &self.trajectory {
            let mut row = vec![format!("{:.9e}", s.time)];
            row.extend(s.populations().iter().map(|p| format!("{p:.12e}")));
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| PropagationError::Csv(e.to_string()))
    }
}

/// Outcome of a fixed-step run on a block of states.
#[derive(Clone, Debug)]
pub struct FixedRun {
    pub states: CMatrix,
    pub samples: Vec<(f64, CMatrix)>,
    pub steps: usize,
}

fn apply_exp(h: &CMatrix, dt: f64, psi: &CMatrix, method: ExpMethod) -> CMatrix {
    let eigen = match method {
        ExpMethod::Eigen => true,
        ExpMethod::Taylor => false,
        ExpMethod::Auto => h.nrows() <= 16 || linalg::is_diagonal(h),
    };
    if eigen {
        linalg::hermitian_exp(h, dt) * psi
    } else {
        linalg::hermitian_exp_action(h, dt, psi)
    }
}

fn checked(h: &dyn Hamiltonian, t: f64) -> Result<CMatrix, PropagationError> {
    let m = h.at(t);
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(PropagationError::NonFinite(t));
    }
    Ok(m)
}

/// Integrates `psi` (one state per column) from `t0` to `t1` in `steps`
/// equal midpoint steps, recording states at `sample_times` by side steps
/// from the preceding grid point.
pub fn evolve_fixed(
    h: &dyn Hamiltonian,
    psi: &CMatrix,
    t0: f64,
    t1: f64,
    steps: usize,
    method: ExpMethod,
    sample_times: &[f64],
) -> Result<FixedRun, PropagationError> {
    if psi.nrows() != h.dim() {
        return Err(PropagationError::DimensionMismatch { state: psi.nrows(), hamiltonian: h.dim() });
    }
    let steps = steps.max(1);
    let mut samples_sorted: Vec<f64> = sample_times.iter().copied().filter(|t| *t >= t0 && *t <= t1).collect();
    samples_sorted.sort_by(f64::total_cmp);
    let mut next_sample = 0;
    let mut samples = Vec::with_capacity(samples_sorted.len());
    let span = t1 - t0;
    let dt = span / steps as f64;
    let mut state = psi.clone();
    for k in 0..steps {
        let t = t0 + span * k as f64 / steps as f64;
        let t_next = t0 + span * (k + 1) as f64 / steps as f64;
        while next_sample < samples_sorted.len() && samples_sorted[next_sample] < t_next {
            let ts = samples_sorted[next_sample];
            if ts <= t {
                samples.push((ts, state.clone()));
            } else {
                let hs = checked(h, 0.5 * (t + ts))?;
                samples.push((ts, apply_exp(&hs, ts - t, &state, method)));
            }
            next_sample += 1;
        }
        let hm = checked(h, t + 0.5 * dt)?;
        state = apply_exp(&hm, dt, &state, method);
    }
    while next_sample < samples_sorted.len() {
        samples.push((samples_sorted[next_sample], state.clone()));
        next_sample += 1;
    }
    Ok(FixedRun { states: state, samples, steps })
}

/// Accepted result of the halving loop.
#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub run: FixedRun,
    pub dt: f64,
    pub defect: f64,
}

/// Global step halving until two successive runs agree to `opts.tol`.
pub fn evolve_adaptive(
    h: &dyn Hamiltonian,
    psi: &CMatrix,
    t_f: f64,
    opts: &PropagationOptions,
) -> Result<AdaptiveRun, PropagationError> {
    if !(t_f > 0.0 && t_f.is_finite()) {
        return Err(PropagationError::BadDuration(t_f));
    }
    let mut n = ((t_f / opts.dt_init).ceil() as usize).max(1);
    let mut coarse = evolve_fixed(h, psi, 0.0, t_f, n, opts.exp_method, &opts.sample_times)?;
    let mut defect = f64::INFINITY;
    for _ in 0..opts.max_halvings {
        n *= 2;
        let fine = evolve_fixed(h, psi, 0.0, t_f, n, opts.exp_method, &opts.sample_times)?;
        defect = linalg::overlap_defect(&coarse.states, &fine.states);
        if defect < opts.tol {
            return Ok(AdaptiveRun { run: fine, dt: t_f / n as f64, defect });
        }
        coarse = fine;
    }
    Err(PropagationError::NonConvergence { halvings: opts.max_halvings, defect, dt: t_f / n as f64 })
}

fn check_normalized(psi: &CVector) -> Result<(), PropagationError> {
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(PropagationError::NotNormalized(n));
    }
    Ok(())
}

fn to_result(psi_block: &AdaptiveRun, t_f: f64) -> PropagationResult {
    let col = |m: &CMatrix| m.column(0).into_owned();
    let final_state = QuantumState::new(col(&psi_block.run.states), t_f);
    let trajectory = psi_block.run.samples.iter().map(|(t, m)| QuantumState::new(col(m), *t)).collect();
    PropagationResult {
        norm_drift: (final_state.norm() - 1.0).abs(),
        final_state,
        trajectory,
        step_count: psi_block.run.steps,
        dt: psi_block.dt,
        convergence_defect: psi_block.defect,
    }
}

/// Adaptive propagation of a single state under any Hamiltonian over `[0, t_f]`.
pub fn propagate_hamiltonian(
    h: &dyn Hamiltonian,
    psi0: &CVector,
    t_f: f64,
    opts: &PropagationOptions,
) -> Result<PropagationResult, PropagationError> {
    check_normalized(psi0)?;
    let block = CMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice());
    let run = evolve_adaptive(h, &block, t_f, opts)?;
    Ok(to_result(&run, t_f))
}

/// Propagates `psi0` through the schedule.
pub fn propagate(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    psi0: &CVector,
    opts: &PropagationOptions,
) -> Result<PropagationResult, PropagationError> {
    propagate_hamiltonian(&ScheduleHamiltonian::new(model, schedule), psi0, schedule.duration(), opts)
}

/// Fixed-step propagation of a single state, no adaptivity.
pub fn propagate_fixed(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    psi0: &CVector,
    steps: usize,
    opts: &PropagationOptions,
) -> Result<PropagationResult, PropagationError> {
    check_normalized(psi0)?;
    let t_f = schedule.duration();
    if !(t_f > 0.0) {
        return Err(PropagationError::BadDuration(t_f));
    }
    let block = CMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice());
    let h = ScheduleHamiltonian::new(model, schedule);
    let run = evolve_fixed(&h, &block, 0.0, t_f, steps, opts.exp_method, &opts.sample_times)?;
    Ok(to_result(&AdaptiveRun { dt: t_f / run.steps as f64, run, defect: f64::NAN }, t_f))
}

/// Full propagator, one basis state per column.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryResult {
    pub unitary: CMatrix,
    pub dt: f64,
    pub step_count: usize,
    pub convergence_defect: f64,
}

impl UnitaryResult {
    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.unitary)
    }
}

pub fn propagate_unitary_hamiltonian(
    h: &dyn Hamiltonian,
    t_f: f64,
    opts: &PropagationOptions,
) -> Result<UnitaryResult, PropagationError> {
    let n = h.dim();
    let opts = PropagationOptions { sample_times: Vec::new(), ..opts.clone() };
    let run = evolve_adaptive(h, &CMatrix::identity(n, n), t_f, &opts)?;
    Ok(UnitaryResult { unitary: run.run.states, dt: run.dt, step_count: run.run.steps, convergence_defect: run.defect })
}

pub fn propagate_unitary(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    opts: &PropagationOptions,
) -> Result<UnitaryResult, PropagationError> {
    propagate_unitary_hamiltonian(&ScheduleHamiltonian::new(model, schedule), schedule.duration(), opts)
}

/// Normalised column vector from real amplitudes over `labels`.
pub fn real_state(labels: &[StateLabel], amps: &[(StateLabel, f64)]) -> Result<CVector, SpinError> {
    let pairs: Vec<_> = amps.iter().map(|&(l, a)| (l, c(a, 0.0))).collect();
    Ok(QuantumState::from_labels(labels, &pairs)?.amplitudes)
}
