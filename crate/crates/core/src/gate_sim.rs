//! Two-qubit gate from a static field gradient with the quantization axis
//! rotated near a motional sideband.
//!
//! A gradient couples the lab-frame `J_z` of each ion to the position of a
//! motional mode. Rotating the quantization axis at `ω_r` turns this into a
//! spin-dependent force at detuning `δ = ω_a − ω_r`, which closes a loop in
//! phase space after `2π/|δ|` and leaves a phase `∝ J_z²`.
//!
//! Two frames are available. `FullRotatingAxis` keeps the gradient term in
//! the frame that follows the field, `Ω_zz X(t)(J_z cos ω_r t + J_x sin ω_r t)`,
//! and moves to the interaction picture of the Zeeman term so that `J_x`
//! precesses at the Zeeman splitting. `Effective` is the rotating-wave limit
//! `(Ω_zz/2)(a† e^{iδt} + a e^{−iδt}) J_z`.
//!
//! The state space is spins ⊗ mode with the spin index slowest; ion 1 is the
//! slowest spin index.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::linalg::{c, kron, CMatrix, CVector, C64, I};
use crate::propagator::{propagate_hamiltonian, ExpMethod, Hamiltonian, PropagationError, PropagationOptions};
use crate::spin_algebra::{angular_momentum_ops, SpinError};
use crate::units::{khz, mhz};

pub const GATE_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum GateError {
    #[error("invalid gate parameter: {0}")]
    InvalidParameter(String),
    #[error("Fock cutoff {n_max} not converged: fidelity changes by {delta:e} at cutoff {}", n_max + 4)]
    Truncation { n_max: usize, delta: f64 },
    #[error("state has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("gate config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Spin(#[from] SpinError),
}

/// Ions sharing one motional mode. Rates in rad/μs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinMotionSystem {
    pub n_spins: usize,
    /// Spin of each ion's qubit manifold; 1/2 for a projected qubit.
    #[serde(default = "half")]
    pub spin: f64,
    /// `ω_a`.
    pub mode_frequency: f64,
    /// `n_max`; the mode keeps Fock states `0..=n_max`.
    pub fock_cutoff: usize,
    /// `Ω_zz = μ_B g_J B_z′ β_a`.
    pub coupling: f64,
    /// `ω_r`.
    pub rotation_rate: f64,
    /// `μ_B g_J B_t`.
    pub zeeman_splitting: f64,
    /// `μ_B g_J B_z` of a uniform lab-frame bias, usually calibrated out.
    #[serde(default)]
    pub static_bias: f64,
}

fn half() -> f64 {
    0.5
}

impl SpinMotionSystem {
    /// Two qubits, `ω_a = 2π×2 MHz`, `δ = 2π×10 kHz`, `B_t = 10 G`, `n_max = 20`,
    /// coupling set for a π/2 phase per loop.
    pub fn desk_scale() -> Self {
        let omega_a = mhz(2.0);
        let delta = khz(10.0);
        Self {
            n_spins: 2,
            spin: 0.5,
            mode_frequency: omega_a,
            fock_cutoff: 20,
            coupling: coupling_for_phase(delta, PI / 2.0),
            rotation_rate: omega_a - delta,
            zeeman_splitting: mhz(1.399624604 * 2.0023193 * 10.0),
            static_bias: 0.0,
        }
    }

    /// `δ = ω_a − ω_r`.
    pub fn detuning(&self) -> f64 {
        self.mode_frequency - self.rotation_rate
    }

    /// `2π/|δ|`.
    pub fn closure_time(&self) -> f64 {
        2.0 * PI / self.detuning().abs()
    }

    pub fn spin_dim(&self) -> usize {
        ((2.0 * self.spin).round() as usize + 1).pow(self.n_spins as u32)
    }

    pub fn mode_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.mode_dim()
    }

    pub fn with_cutoff(&self, n_max: usize) -> Self {
        Self { fock_cutoff: n_max, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), GateError> {
        let bad = |m: String| Err(GateError::InvalidParameter(m));
        if self.n_spins == 0 {
            return bad("n_spins must be at least 1".into());
        }
        if self.fock_cutoff < 1 {
            return bad("fock_cutoff must be at least 1".into());
        }
        let twice = 2.0 * self.spin;
        if !(self.spin > 0.0 && (twice - twice.round()).abs() < 1e-12) {
            return bad(format!("spin must be a positive multiple of 1/2, got {}", self.spin));
        }
        for (name, v) in [
            ("mode_frequency", self.mode_frequency),
            ("coupling", self.coupling),
            ("rotation_rate", self.rotation_rate),
            ("zeeman_splitting", self.zeeman_splitting),
            ("static_bias", self.static_bias),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if !(self.mode_frequency > 0.0) {
            return bad("mode_frequency must be positive".into());
        }
        if self.spin_dim() > 64 || self.dim() > 4096 {
            return bad(format!("Hilbert space of dimension {} is too large", self.dim()));
        }
        Ok(())
    }
}

/// `Ω_zz` for which the phase difference between the `J_z = 1` and `J_z = 0`
/// eigenspaces after one loop is `phase`.
pub fn coupling_for_phase(delta: f64, phase: f64) -> f64 {
    // Φ_m = (Ω_zz m / 2)² · 2π / δ² at closure.
    2.0 * delta.abs() * (phase / (2.0 * PI)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateFrame {
    FullRotatingAxis,
    #[default]
    Effective,
}

/// A lab-frame `ẑ` field tone entering as `amplitude·cos(ωt + phase)·J_z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateNoise {
    /// rad/μs.
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionState {
    Fock(usize),
    /// Coherent amplitude `[Re β, Im β]`.
    Coherent([f64; 2]),
}

impl Default for MotionState {
    fn default() -> Self {
        MotionState::Fock(0)
    }
}

impl MotionState {
    pub fn vector(&self, mode_dim: usize) -> Result<CVector, GateError> {
        match *self {
            MotionState::Fock(n) => {
                if n >= mode_dim {
                    return Err(GateError::InvalidParameter(format!("Fock state {n} above cutoff {}", mode_dim - 1)));
                }
                let mut v = CVector::zeros(mode_dim);
                v[n] = c(1.0, 0.0);
                Ok(v)
            }
            MotionState::Coherent([re, im]) => {
                let v = coherent_state(c(re, im), mode_dim);
                let norm = v.norm();
                Ok(v / c(norm, 0.0))
            }
        }
    }
}

/// Truncated (unnormalized) coherent state `e^{−|β|²/2} Σ βⁿ/√n! |n⟩`.
pub fn coherent_state(beta: C64, mode_dim: usize) -> CVector {
    let mut v = CVector::zeros(mode_dim);
    let mut term = c((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..mode_dim {
        v[n] = term;
        term *= beta / (n as f64 + 1.0).sqrt();
    }
    v
}

/// Collective spin and mode operators on the full space.
#[derive(Clone, Debug)]
struct GateOperators {
    /// `J_k ⊗ a†`.
    raise: [CMatrix; 3],
    /// `J_k ⊗ 1`.
    spin: [CMatrix; 3],
    /// Diagonal of `J_z` on the spin space.
    jz_diag: Vec<f64>,
}

/// `[J_x, J_y, J_z]` summed over `n` ions of spin `s`.
pub fn collective_spin(n: usize, s: f64) -> Result<[CMatrix; 3], GateError> {
    let single = angular_momentum_ops(s)?;
    let d = single[0].dim();
    let total = d.pow(n as u32);
    let mut out = [CMatrix::zeros(total, total), CMatrix::zeros(total, total), CMatrix::zeros(total, total)];
    for ion in 0..n {
        let left = CMatrix::identity(d.pow(ion as u32), d.pow(ion as u32));
        let right = CMatrix::identity(d.pow((n - ion - 1) as u32), d.pow((n - ion - 1) as u32));
        for k in 0..3 {
            out[k] += kron(&kron(&left, &single[k].entries), &right);
        }
    }
    Ok(out)
}

/// Annihilation operator on Fock states `0..mode_dim`.
pub fn annihilation(mode_dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(mode_dim, mode_dim);
    for n in 1..mode_dim {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

impl GateOperators {
    fn new(sys: &SpinMotionSystem) -> Result<Self, GateError> {
        let j = collective_spin(sys.n_spins, sys.spin)?;
        let m = sys.mode_dim();
        let adag = annihilation(m).adjoint();
        let id = CMatrix::identity(m, m);
        Ok(Self {
            raise: [0, 1, 2].map(|k| kron(&j[k], &adag)),
            spin: [0, 1, 2].map(|k| kron(&j[k], &id)),
            jz_diag: (0..j[2].nrows()).map(|k| j[2][(k, k)].re).collect(),
        })
    }
}

/// Time-dependent gate Hamiltonian in one of the two frames.
#[derive(Clone, Debug)]
pub struct GateHamiltonian {
    sys: SpinMotionSystem,
    frame: GateFrame,
    noise: Option<GateNoise>,
    ops: GateOperators,
}

/// Builds the gate Hamiltonian, with an optional lab-frame noise tone.
pub fn build_gate_hamiltonian(
    sys: &SpinMotionSystem,
    frame: GateFrame,
    noise: Option<GateNoise>,
) -> Result<GateHamiltonian, GateError> {
    sys.validate()?;
    Ok(GateHamiltonian { sys: sys.clone(), frame, noise, ops: GateOperators::new(sys)? })
}

impl GateHamiltonian {
    pub fn system(&self) -> &SpinMotionSystem {
        &self.sys
    }

    pub fn frame(&self) -> GateFrame {
        self.frame
    }

    fn lab_field(&self, t: f64) -> f64 {
        self.sys.static_bias + self.noise.map_or(0.0, |n| n.amplitude * (n.omega * t + n.phase).cos())
    }
}

impl Hamiltonian for GateHamiltonian {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn at(&self, t: f64) -> CMatrix {
        let s = &self.sys;
        let (sin_r, cos_r) = (s.rotation_rate * t).sin_cos();
        let lab = self.lab_field(t);
        let mut h = match self.frame {
            GateFrame::Effective => {
                let g = 0.5 * s.coupling;
                let half = &self.ops.raise[2] * ((I * s.detuning() * t).exp() * g);
                let mut h = &half + half.adjoint();
                if lab != 0.0 {
                    // Lab J_z seen from the rotating axis, with the J_x part averaged out.
                    h += &self.ops.spin[2] * c(lab * cos_r, 0.0);
                }
                h
            }
            GateFrame::FullRotatingAxis => {
                let (sin_z, cos_z) = (s.zeeman_splitting * t).sin_cos();
                // J_z cos ω_r t + (J_x cos Zt − J_y sin Zt) sin ω_r t
                let w = [sin_r * cos_z, -sin_r * sin_z, cos_r];
                let phase = (I * s.mode_frequency * t).exp() * s.coupling;
                let mut half = CMatrix::zeros(s.dim(), s.dim());
                for k in 0..3 {
                    if w[k] != 0.0 {
                        half += &self.ops.raise[k] * (phase * w[k]);
                    }
                }
                let mut h = &half + half.adjoint();
                if lab != 0.0 {
                    for k in 0..3 {
                        if w[k] != 0.0 {
                            h += &self.ops.spin[k] * c(lab * w[k], 0.0);
                        }
                    }
                }
                h
            }
        };
        // Exact Hermitian symmetry keeps the step exponential unitary.
        h = (&h + h.adjoint()) * c(0.5, 0.0);
        h
    }
}

/// Closed-form effective-frame branch of a `J_z = m` component: displacement
/// `α_m(t) = −(Ω_eff m/δ)(e^{iδt} − 1)` and phase
/// `Φ_m(t) = (Ω_eff m)²(δt − sin δt)/δ²` with `Ω_eff = Ω_zz/2`.
pub fn closed_form_branch(sys: &SpinMotionSystem, m: f64, t: f64) -> (C64, f64) {
    let g = 0.5 * sys.coupling * m;
    let d = sys.detuning();
    if d == 0.0 {
        return (c(0.0, -g * t), 0.0);
    }
    let alpha = -((I * d * t).exp() - 1.0) * (g / d);
    let phase = g * g * (d * t - (d * t).sin()) / (d * d);
    (alpha, phase)
}

/// `Σ_m e^{iΦ_m(t)} P_m ψ`: the spin state the ideal gate produces at `t`
/// if the loop is closed.
pub fn ideal_gate_target(sys: &SpinMotionSystem, psi_spin: &CVector, t: f64) -> Result<CVector, GateError> {
    let j = collective_spin(sys.n_spins, sys.spin)?;
    if psi_spin.len() != j[2].nrows() {
        return Err(GateError::DimensionMismatch { got: psi_spin.len(), expected: j[2].nrows() });
    }
    Ok(CVector::from_iterator(
        psi_spin.len(),
        (0..psi_spin.len()).map(|k| psi_spin[k] * (I * closed_form_branch(sys, j[2][(k, k)].re, t).1).exp()),
    ))
}

/// Spin reduced density matrix of a spin ⊗ mode state.
pub fn reduced_spin_state(state: &CVector, spin_dim: usize, mode_dim: usize) -> Result<CMatrix, GateError> {
    if state.len() != spin_dim * mode_dim {
        return Err(GateError::DimensionMismatch { got: state.len(), expected: spin_dim * mode_dim });
    }
    let m = CMatrix::from_fn(spin_dim, mode_dim, |s, n| state[s * mode_dim + n]);
    Ok(&m * m.adjoint())
}

/// `⟨T|ρ_spin|T⟩` for a pure spin target, which equals the Uhlmann fidelity
/// whether or not spin and motion are entangled.
pub fn bell_fidelity(state: &CVector, target: &CVector, mode_dim: usize) -> Result<f64, GateError> {
    let rho = reduced_spin_state(state, target.len(), mode_dim)?;
    let f = target.dotc(&(&rho * target)).re / (target.norm_squared() * rho.trace().re);
    Ok(f.clamp(0.0, 1.0))
}

/// `1 − Tr ρ_spin²`; zero when spin and motion factorize.
pub fn spin_motion_entanglement(state: &CVector, spin_dim: usize, mode_dim: usize) -> Result<f64, GateError> {
    let rho = reduced_spin_state(state, spin_dim, mode_dim)?;
    let tr = rho.trace().re;
    let purity = (&rho * &rho).trace().re / (tr * tr);
    Ok((1.0 - purity).max(0.0))
}

/// `|+⟩^{⊗n}` in the `J_z` basis.
pub fn all_plus_state(sys: &SpinMotionSystem) -> CVector {
    let d = sys.spin_dim();
    CVector::from_element(d, c(1.0 / (d as f64).sqrt(), 0.0))
}

/// Per-`m` outcome of a gate run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub m: f64,
    /// Population of the `J_z = m` eigenspace.
    pub weight: f64,
    /// `⟨a⟩` within the branch, `[Re, Im]`.
    pub alpha: [f64; 2],
    pub alpha_closed_form: [f64; 2],
    /// Phase relative to the initial branch state displaced by `α`; only
    /// for a vacuum start.
    pub phase: Option<f64>,
    pub phase_closed_form: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub t: f64,
    /// `⟨a⟩` per branch, in the order of `GateResult::branches`.
    pub alpha: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    #[serde(skip)]
    pub final_state: CVector,
    pub frame: GateFrame,
    pub t_gate: f64,
    /// Against the ideal closed-loop target at `t_gate`.
    pub bell_fidelity: f64,
    pub residual_spin_motion_entanglement: f64,
    /// Measured `Φ_{m=1} − Φ_{m=0}` (or the two smallest `|m|` for odd
    /// half-integer totals), rad.
    pub geometric_phase: Option<f64>,
    pub geometric_phase_closed_form: f64,
    pub branches: Vec<Branch>,
    pub trajectory: Vec<PhaseSpacePoint>,
    /// `|F(n_max + 4) − F(n_max)|` when checked.
    pub truncation_delta: Option<f64>,
    pub step_count: usize,
    pub dt: f64,
}

impl GateResult {
    /// `t, Re α, Im α` per branch.
    pub fn write_phase_space_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# frame: {:?}, t_gate: {} us", self.frame, self.t_gate)?;
        let mut header = vec!["t_us".to_string()];
        for b in &self.branches {
            header.push(format!("re_alpha_m{}", b.m));
            header.push(format!("im_alpha_m{}", b.m));
        }
        writeln!(out, "{}", header.join(","))?;
        for p in &self.trajectory {
            let mut row = vec![format!("{:.9e}", p.t)];
            for a in &p.alpha {
                row.push(format!("{:.9e}", a[0]));
                row.push(format!("{:.9e}", a[1]));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateOptions {
    pub propagation: PropagationOptions,
    pub noise: Option<GateNoise>,
    /// Phase-space samples over `[0, t_gate]`; 0 records none.
    pub trajectory_samples: usize,
    /// Rerun at `n_max + 4` and fail if fidelity moves by more than this.
    pub truncation_tol: Option<f64>,
}

impl Default for GateOptions {
    fn default() -> Self {
        Self {
            propagation: PropagationOptions { exp_method: ExpMethod::Taylor, ..PropagationOptions::default() },
            noise: None,
            trajectory_samples: 0,
            truncation_tol: Some(1e-6),
        }
    }
}

/// Distinct `J_z` eigenvalues, descending, with their spin indices.
fn branches_of(jz: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for (k, &m) in jz.iter().enumerate() {
        match out.iter_mut().find(|(v, _)| (v - m).abs() < 1e-9) {
            Some((_, idx)) => idx.push(k),
            None => out.push((m, vec![k])),
        }
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

fn branch_alpha(state: &CVector, idx: &[usize], mode_dim: usize) -> (f64, C64) {
    let mut weight = 0.0;
    let mut mean = c(0.0, 0.0);
    for &s in idx {
        let base = s * mode_dim;
        for n in 0..mode_dim {
            weight += state[base + n].norm_sqr();
            if n + 1 < mode_dim {
                mean += state[base + n].conj() * state[base + n + 1] * (n as f64 + 1.0).sqrt();
            }
        }
    }
    (weight, if weight > 0.0 { mean / weight } else { mean })
}

fn run_once(
    sys: &SpinMotionSystem,
    frame: GateFrame,
    psi_spin: &CVector,
    motion: MotionState,
    t_gate: f64,
    opts: &GateOptions,
    samples: bool,
) -> Result<(crate::propagator::PropagationResult, GateHamiltonian), GateError> {
    let h = build_gate_hamiltonian(sys, frame, opts.noise)?;
    if psi_spin.len() != sys.spin_dim() {
        return Err(GateError::DimensionMismatch { got: psi_spin.len(), expected: sys.spin_dim() });
    }
    let spin_norm = psi_spin.norm();
    if (spin_norm - 1.0).abs() > 1e-9 {
        return Err(GateError::InvalidParameter(format!("spin state norm is {spin_norm}")));
    }
    let psi0 = kron(
        &CMatrix::from_column_slice(psi_spin.len(), 1, psi_spin.as_slice()),
        &CMatrix::from_column_slice(sys.mode_dim(), 1, motion.vector(sys.mode_dim())?.as_slice()),
    );
    let psi0 = CVector::from_column_slice(psi0.as_slice());
    let mut popts = opts.propagation.clone();
    popts.sample_times = if samples && opts.trajectory_samples > 0 {
        (0..=opts.trajectory_samples).map(|k| t_gate * k as f64 / opts.trajectory_samples as f64).collect()
    } else {
        Vec::new()
    };
    Ok((propagate_hamiltonian(&h, &psi0, t_gate, &popts)?, h))
}

/// Propagates `psi_spin ⊗ motion` for `t_gate` and compares with the
/// closed-form effective dynamics.
pub fn simulate_gate(
    sys: &SpinMotionSystem,
    frame: GateFrame,
    psi_spin: &CVector,
    motion: MotionState,
    t_gate: f64,
    opts: &GateOptions,
) -> Result<GateResult, GateError> {
    if !(t_gate > 0.0 && t_gate.is_finite()) {
        return Err(GateError::InvalidParameter(format!("t_gate must be positive, got {t_gate}")));
    }
    let (run, h) = run_once(sys, frame, psi_spin, motion, t_gate, opts, true)?;
    let md = sys.mode_dim();
    let state = run.final_state.amplitudes.clone();
    let target = ideal_gate_target(sys, psi_spin, t_gate)?;
    let fidelity = bell_fidelity(&state, &target, md)?;
    let entanglement = spin_motion_entanglement(&state, sys.spin_dim(), md)?;

    let groups = branches_of(&h.ops.jz_diag);
    let vacuum = motion == MotionState::Fock(0);
    let mut branches = Vec::with_capacity(groups.len());
    for (m, idx) in &groups {
        let (weight, alpha) = branch_alpha(&state, idx, md);
        let (alpha_cf, phase_cf) = closed_form_branch(sys, *m, t_gate);
        let phase = if vacuum && weight > 1e-12 {
            let coh = coherent_state(alpha, md);
            let mut overlap = c(0.0, 0.0);
            for &s in idx {
                for n in 0..md {
                    overlap += (psi_spin[s] * coh[n]).conj() * state[s * md + n];
                }
            }
            (overlap.norm() > 1e-9).then(|| overlap.arg())
        } else {
            None
        };
        branches.push(Branch {
            m: *m,
            weight,
            alpha: [alpha.re, alpha.im],
            alpha_closed_form: [alpha_cf.re, alpha_cf.im],
            phase,
            phase_closed_form: phase_cf,
        });
    }
    let (hi, lo) = phase_pair(&branches);
    let geometric_phase = match (hi.and_then(|k| branches[k].phase), lo.and_then(|k| branches[k].phase)) {
        (Some(a), Some(b)) => Some(wrap(a - b)),
        _ => None,
    };
    let geometric_phase_closed_form = match (hi, lo) {
        (Some(a), Some(b)) => branches[a].phase_closed_form - branches[b].phase_closed_form,
        _ => 0.0,
    };
    let trajectory = run
        .trajectory
        .iter()
        .map(|s| PhaseSpacePoint {
            t: s.time,
            alpha: groups
                .iter()
                .map(|(_, idx)| {
                    let a = branch_alpha(&s.amplitudes, idx, md).1;
                    [a.re, a.im]
                })
                .collect(),
        })
        .collect();

    let truncation_delta = match opts.truncation_tol {
        Some(tol) => {
            let bigger = sys.with_cutoff(sys.fock_cutoff + 4);
            let (r2, _) = run_once(&bigger, frame, psi_spin, motion, t_gate, opts, false)?;
            let f2 = bell_fidelity(&r2.final_state.amplitudes, &target, bigger.mode_dim())?;
            let delta = (f2 - fidelity).abs();
            if delta > tol {
                return Err(GateError::Truncation { n_max: sys.fock_cutoff, delta });
            }
            Some(delta)
        }
        None => None,
    };

    Ok(GateResult {
        final_state: state,
        frame,
        t_gate,
        bell_fidelity: fidelity,
        residual_spin_motion_entanglement: entanglement,
        geometric_phase,
        geometric_phase_closed_form,
        branches,
        trajectory,
        truncation_delta,
        step_count: run.step_count,
        dt: run.dt,
    })
}

/// Indices of the `m` closest to 1 and the smallest `|m|` below it.
fn phase_pair(branches: &[Branch]) -> (Option<usize>, Option<usize>) {
    let lo = (0..branches.len()).min_by(|&a, &b| branches[a].m.abs().total_cmp(&branches[b].m.abs()));
    let hi = lo.and_then(|l| {
        (0..branches.len()).filter(|&k| branches[k].m > branches[l].m).min_by(|&a, &b| branches[a].m.total_cmp(&branches[b].m))
    });
    (hi, lo)
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// `1 − |⟨ψ_clean|ψ_noisy⟩|²` between runs with and without `noise`.
pub fn noise_infidelity(
    sys: &SpinMotionSystem,
    frame: GateFrame,
    psi_spin: &CVector,
    motion: MotionState,
    t_gate: f64,
    noise: GateNoise,
    opts: &GateOptions,
) -> Result<f64, GateError> {
    let clean = GateOptions { noise: None, ..opts.clone() };
    let noisy = GateOptions { noise: Some(noise), ..opts.clone() };
    let (a, _) = run_once(sys, frame, psi_spin, motion, t_gate, &clean, false)?;
    let (b, _) = run_once(sys, frame, psi_spin, motion, t_gate, &noisy, false)?;
    let o = a.final_state.amplitudes.dotc(&b.final_state.amplitudes);
    Ok((1.0 - o.norm_sqr()).max(0.0))
}

/// `Ω_eff` from `|⟨a⟩|/(|m| t)` of the top branch at a short time `t`.
pub fn effective_coupling_from_slope(
    sys: &SpinMotionSystem,
    frame: GateFrame,
    t: f64,
    opts: &GateOptions,
) -> Result<f64, GateError> {
    let psi = all_plus_state(sys);
    let opts = GateOptions { truncation_tol: None, trajectory_samples: 0, ..opts.clone() };
    let r = simulate_gate(sys, frame, &psi, MotionState::Fock(0), t, &opts)?;
    let top = &r.branches[0];
    Ok(top.alpha[0].hypot(top.alpha[1]) / (top.m.abs() * t))
}

/// JSON gate descriptor. Rates in rad/μs, times in μs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    #[serde(default = "two")]
    pub n_spins: usize,
    #[serde(default = "half")]
    pub spin: f64,
    pub omega_a: f64,
    pub delta: f64,
    /// `Ω_zz`; defaults to a π/2 phase per loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    pub zeeman_splitting: f64,
    pub n_max: usize,
    #[serde(default)]
    pub frame: GateFrame,
    /// Defaults to one loop, `2π/|δ|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_gate: Option<f64>,
    #[serde(default)]
    pub motion: MotionState,
    #[serde(default)]
    pub static_bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<GateNoise>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default = "default_samples")]
    pub trajectory_samples: usize,
}

fn two() -> usize {
    2
}

fn default_samples() -> usize {
    200
}

impl GateConfig {
    pub fn from_json(text: &str) -> Result<Self, GateError> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| GateError::Config {
            path: ".".into(),
            message: format!("malformed JSON at line {} column {}: {e}", e.line(), e.column()),
        })?;
        if let Some(obj) = value.as_object_mut() {
            if let Some(v) = obj.remove("schema") {
                if v.as_u64() != Some(u64::from(GATE_SCHEMA)) {
                    return Err(GateError::Config {
                        path: "schema".into(),
                        message: format!("unsupported schema version {v}, expected {GATE_SCHEMA}"),
                    });
                }
            }
        }
        serde_path_to_error::deserialize(value)
            .map_err(|e| GateError::Config { path: e.path().to_string(), message: e.inner().to_string() })
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").insert("schema".into(), Value::from(GATE_SCHEMA));
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    pub fn system(&self) -> Result<SpinMotionSystem, GateError> {
        let sys = SpinMotionSystem {
            n_spins: self.n_spins,
            spin: self.spin,
            mode_frequency: self.omega_a,
            fock_cutoff: self.n_max,
            coupling: self.coupling.unwrap_or_else(|| coupling_for_phase(self.delta, PI / 2.0)),
            rotation_rate: self.omega_a - self.delta,
            zeeman_splitting: self.zeeman_splitting,
            static_bias: self.static_bias,
        };
        sys.validate()?;
        if self.delta == 0.0 {
            return Err(GateError::InvalidParameter("delta must be nonzero".into()));
        }
        Ok(sys)
    }

    pub fn gate_time(&self) -> f64 {
        self.t_gate.unwrap_or(2.0 * PI / self.delta.abs())
    }

    pub fn options(&self) -> GateOptions {
        let mut o = GateOptions { noise: self.noise, trajectory_samples: self.trajectory_samples, ..GateOptions::default() };
        if let Some(tol) = self.tol {
            o.propagation.tol = tol;
        }
        o
    }
}
