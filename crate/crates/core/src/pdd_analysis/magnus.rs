//! Diabatic corrections from the Magnus expansion in the frame that follows
//! the field.
//!
//! In that frame, after removing the Zeeman precession `ε(t)`, the residual
//! generator is `H_I = −φ̇ (F_y cos ε + F_x sin ε)`. Its first Magnus term is
//! `i (a F_y + b F_x)` with `a = ∫φ̇ cos ε`, `b = ∫φ̇ sin ε`, which drives
//! transitions out of the stretched states. The second term is
//! `−i θ_z F_z` with `θ_z = ½ ∬_{t₂<t₁} φ̇₁ φ̇₂ sin(ε₁ − ε₂)`, a repeatable
//! phase.
//!
//! The bare first-order integrals cancel almost completely when the two ends
//! of a rotation interfere destructively, and the leakage left there comes
//! from the shifted precession rate. The leakage estimate therefore uses the
//! same integrals with `ε̇` replaced by `sgn(ε̇)·√(ε̇² + φ̇²)`, which folds the
//! `θ_z` rate back into the phase.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::field_schedule::{phi_and_epsilon, FieldSchedule};
use crate::linalg::{c, CMatrix, CVector, C64};
use crate::quadrature::{cumulative_trapezoid, simpson_uniform};
use crate::spin_algebra::{StateLabel, ZeemanModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnusEstimate {
    /// `∫φ̇ cos ε dt`, drive along `F_y`.
    pub drive_y: f64,
    /// `∫φ̇ sin ε dt`, drive along `F_x`.
    pub drive_x: f64,
    /// `∫φ̇ cos ε' dt` with the dressed phase `ε'`.
    pub dressed_drive_y: f64,
    /// `∫φ̇ sin ε' dt`.
    pub dressed_drive_x: f64,
    /// `θ_z`, rad; the frame picks up `exp(−i θ_z F_z)`.
    pub jz_shift: f64,
    /// Gyromagnetic ratio used for `ε`, rad/(μs·G).
    pub gamma: f64,
    pub samples: usize,
}

impl MagnusEstimate {
    /// `∫φ̇ e^{iε} dt`.
    pub fn amplitude(&self) -> C64 {
        c(self.drive_y, self.drive_x)
    }

    /// `∫φ̇ e^{iε'} dt`.
    pub fn dressed_amplitude(&self) -> C64 {
        c(self.dressed_drive_y, self.dressed_drive_x)
    }

    /// First-order generator `a F_y + b F_x` on a model's basis.
    pub fn first_order_generator(&self, model: &ZeemanModel) -> CMatrix {
        generator(model, self.drive_y, self.drive_x)
    }

    /// `‖Q (a' F_y + b' F_x) ψ₀‖²` from the dressed integrals, with `Q`
    /// projecting out of `subspace`.
    pub fn leakage_estimate(&self, model: &ZeemanModel, psi0: &CVector, subspace: &[StateLabel]) -> Result<f64, AnalysisError> {
        outside(model, &generator(model, self.dressed_drive_y, self.dressed_drive_x), psi0, subspace)
    }

    /// Same as [`leakage_estimate`](Self::leakage_estimate) from the bare integrals.
    pub fn bare_leakage_estimate(
        &self,
        model: &ZeemanModel,
        psi0: &CVector,
        subspace: &[StateLabel],
    ) -> Result<f64, AnalysisError> {
        outside(model, &self.first_order_generator(model), psi0, subspace)
    }
}

fn generator(model: &ZeemanModel, y: f64, x: f64) -> CMatrix {
    let f = model.total_ops();
    &f[1] * c(y, 0.0) + &f[0] * c(x, 0.0)
}

fn outside(model: &ZeemanModel, gen: &CMatrix, psi0: &CVector, subspace: &[StateLabel]) -> Result<f64, AnalysisError> {
    for s in subspace {
        model.index_of(*s)?;
    }
    let kick = gen * psi0;
    Ok(model.labels().iter().zip(kick.iter()).filter(|(l, _)| !subspace.contains(l)).map(|(_, z)| z.norm_sqr()).sum())
}

/// Evaluates the first- and second-order diabatic terms of a schedule for a
/// manifold with gyromagnetic ratio `gamma` (`H = γ B·F`).
///
/// Requires a continuous `φ̇`; segments that keep the field on a fixed axis
/// contribute nothing.
pub fn magnus_diabatic_estimate(schedule: &FieldSchedule, gamma: f64) -> Result<MagnusEstimate, AnalysisError> {
    if !schedule.is_angle_c1() {
        return Err(AnalysisError::NotSmooth);
    }
    let t_f = schedule.duration();
    // Resolve both the precession (≤ 0.01 rad per step) and the shortest segment.
    let b_max = schedule
        .segments()
        .iter()
        .flat_map(|s| (0..=16).map(move |k| s.field(s.t_start + s.duration() * k as f64 / 16.0)))
        .map(|b| (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt())
        .fold(0.0, f64::max);
    let shortest = schedule.segments().iter().map(|s| s.duration()).fold(f64::INFINITY, f64::min);
    let dt = (0.01 / (gamma.abs() * b_max).max(1e-12)).min(shortest / 200.0).min(t_f / 2000.0);
    let mut n = (t_f / dt).ceil() as usize + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let profile = phi_and_epsilon(schedule, n)?;
    let h = profile.step();
    let eps: Vec<f64> = profile.signed_field_integral.iter().map(|x| gamma * x).collect();
    let rate = &profile.phi_rate;
    let fc: Vec<f64> = rate.iter().zip(&eps).map(|(r, e)| r * e.cos()).collect();
    let fs: Vec<f64> = rate.iter().zip(&eps).map(|(r, e)| r * e.sin()).collect();
    let drive_y = simpson_uniform(&fc, h);
    let drive_x = simpson_uniform(&fs, h);
    let cum_c = cumulative_trapezoid(&fc, h);
    let cum_s = cumulative_trapezoid(&fs, h);
    let inner: Vec<f64> = (0..n).map(|k| rate[k] * (eps[k].sin() * cum_c[k] - eps[k].cos() * cum_s[k])).collect();
    let jz_shift = 0.5 * simpson_uniform(&inner, h);

    // ε̇ = γ B·n̂ at each sample, for the dressed phase.
    let eps_rate: Vec<f64> = (0..n)
        .map(|k| {
            let t = profile.times[k];
            let b = schedule.segment_at(t).field(t);
            let (sn, cs) = profile.phi[k].sin_cos();
            gamma * (b[0] * sn + b[2] * cs)
        })
        .collect();
    let extra: Vec<f64> = eps_rate.iter().zip(rate).map(|(e, r)| e.signum() * ((e * e + r * r).sqrt() - e.abs())).collect();
    let shift = cumulative_trapezoid(&extra, h);
    let dressed: Vec<f64> = eps.iter().zip(&shift).map(|(e, s)| e + s).collect();
    let dc: Vec<f64> = rate.iter().zip(&dressed).map(|(r, e)| r * e.cos()).collect();
    let ds: Vec<f64> = rate.iter().zip(&dressed).map(|(r, e)| r * e.sin()).collect();
    Ok(MagnusEstimate {
        drive_y,
        drive_x,
        dressed_drive_y: simpson_uniform(&dc, h),
        dressed_drive_x: simpson_uniform(&ds, h),
        jz_shift,
        gamma,
        samples: n,
    })
}
