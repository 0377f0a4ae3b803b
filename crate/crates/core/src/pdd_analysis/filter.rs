use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::field_schedule::{add_noise, FieldSchedule, NoiseTone, ScheduleKind, Vec3};
use crate::linalg::CVector;
use crate::propagator::{calibrate_phases, fidelity, propagate_fixed, Calibration, PropagationError, PropagationOptions};
use crate::spin_algebra::ZeemanModel;
use crate::units::to_khz;

/// Which family a schedule belongs to, for labelling output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeTag {
    None,
    Pulsed,
    Continuous,
    Custom,
}

impl SchemeTag {
    pub fn of(schedule: &FieldSchedule) -> Self {
        match schedule.descriptor() {
            Some(ScheduleKind::Constant { .. }) => SchemeTag::None,
            Some(ScheduleKind::Pulsed { .. }) => SchemeTag::Pulsed,
            Some(ScheduleKind::Continuous { .. }) => SchemeTag::Continuous,
            _ => SchemeTag::Custom,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOptions {
    /// Tone amplitude, G.
    pub b_e: f64,
    /// Tone phases averaged per frequency, uniformly spaced on `[0, 2π)`.
    pub n_phases: usize,
    pub polarization: Vec3,
    /// Largest off-structure weight accepted from the reference run.
    pub calibration_bound: f64,
    /// Allowed relative change of `S` when `B_e` is halved.
    pub linearity_tol: f64,
    pub propagation: PropagationOptions,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            b_e: 1e-4,
            n_phases: 8,
            polarization: [0.0, 0.0, 1.0],
            calibration_bound: 1e-2,
            linearity_tol: 0.05,
            propagation: PropagationOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearityCheck {
    pub omega: f64,
    pub s_full: f64,
    pub s_half: f64,
    pub relative_deviation: f64,
}

/// Noise filter response `S(ω) = (1 − F)/B_e²`, 1/G².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterCurve {
    pub scheme: SchemeTag,
    /// rad/μs.
    pub omega: Vec<f64>,
    pub s_values: Vec<f64>,
    pub b_e: f64,
    pub n_phases: usize,
    /// Infidelity of the noise-free run at the same step, subtracted from every point.
    pub baseline: f64,
    /// Points whose baseline-subtracted value came out negative and was set to 0.
    pub clamped: usize,
    pub calibration_dt: f64,
    pub linearity: LinearityCheck,
}

impl FilterCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# scheme: {:?}", self.scheme)?;
        writeln!(out, "# B_e: {:e} G, phases: {}, baseline: {:e}", self.b_e, self.n_phases, self.baseline)?;
        writeln!(out, "omega_rad_per_us,f_khz,S_per_G2")?;
        for (w, s) in self.omega.iter().zip(&self.s_values) {
            writeln!(out, "{w:.9e},{:.9e},{s:.9e}", to_khz(*w))?;
        }
        Ok(())
    }
}

fn fixed_infidelity(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    psi0: &CVector,
    calibration: &Calibration,
    opts: &PropagationOptions,
) -> Result<f64, PropagationError> {
    let steps = ((schedule.duration() / calibration.dt).round() as usize).max(1);
    let opts = PropagationOptions { sample_times: Vec::new(), ..opts.clone() };
    let run = propagate_fixed(model, schedule, psi0, steps, &opts)?;
    Ok(1.0 - fidelity(&run.final_state.amplitudes, &calibration.target(psi0), Some(calibration)))
}

/// `1 − F` after the schedule with `tone` added, measured against the
/// calibrated noise-free map and phases. The run reuses the calibration's step.
pub fn memory_infidelity(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    tone: &NoiseTone,
    psi0: &CVector,
    calibration: &Calibration,
    opts: &PropagationOptions,
) -> Result<f64, AnalysisError> {
    let noisy = add_noise(schedule, tone.clone())?;
    Ok(fixed_infidelity(model, &noisy, psi0, calibration, opts)?)
}

fn phase_average(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    psi0: &CVector,
    calibration: &Calibration,
    omega: f64,
    b_e: f64,
    fopts: &FilterOptions,
) -> Result<f64, AnalysisError> {
    let runs: Vec<Result<f64, AnalysisError>> = (0..fopts.n_phases)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / fopts.n_phases as f64;
            let tone = NoiseTone::new(b_e, omega, theta).with_polarization(fopts.polarization);
            memory_infidelity(model, schedule, &tone, psi0, calibration, &fopts.propagation)
        })
        .collect();
    let mut sum = 0.0;
    for r in runs {
        sum += r?;
    }
    Ok(sum / fopts.n_phases as f64)
}

/// Samples `S(ω)` on `omega_grid` (rad/μs).
///
/// The noise-free schedule is calibrated once; every noisy run then uses the
/// same fixed step so that discretization error cancels in the baseline
/// subtraction. The largest point is recomputed at `B_e/2` and the call fails
/// if the response is not quadratic there.
pub fn filter_response(
    model: &ZeemanModel,
    schedule: &FieldSchedule,
    psi0: &CVector,
    omega_grid: &[f64],
    fopts: &FilterOptions,
) -> Result<FilterCurve, AnalysisError> {
    if !(fopts.b_e > 0.0 && fopts.b_e.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!("B_e must be positive, got {}", fopts.b_e)));
    }
    if fopts.n_phases == 0 {
        return Err(AnalysisError::InvalidParameter("n_phases must be at least 1".into()));
    }
    if omega_grid.is_empty() || omega_grid.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(AnalysisError::InvalidParameter("omega grid must be non-empty, finite and non-negative".into()));
    }
    let reference = schedule.noise_free();
    let calibration = calibrate_phases(model, &reference, &fopts.propagation, fopts.calibration_bound)?;
    let baseline = fixed_infidelity(model, &reference, psi0, &calibration, &fopts.propagation)?;
    let scale = fopts.b_e * fopts.b_e;

    let raw = omega_grid
        .par_iter()
        .map(|&w| phase_average(model, &reference, psi0, &calibration, w, fopts.b_e, fopts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut clamped = 0;
    let s_values: Vec<f64> = raw
        .iter()
        .map(|inf| {
            let s = (inf - baseline) / scale;
            if s < 0.0 {
                clamped += 1;
                0.0
            } else {
                s
            }
        })
        .collect();

    let (peak, &s_full) = s_values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("grid is non-empty");
    let omega = omega_grid[peak];
    let half = fopts.b_e / 2.0;
    let s_half = (phase_average(model, &reference, psi0, &calibration, omega, half, fopts)? - baseline) / (half * half);
    let relative_deviation = if s_full > 0.0 { (s_half - s_full).abs() / s_full } else { 0.0 };
    if relative_deviation > fopts.linearity_tol {
        return Err(AnalysisError::Linearity { omega, s_full, s_half });
    }
    Ok(FilterCurve {
        scheme: SchemeTag::of(schedule),
        omega: omega_grid.to_vec(),
        s_values,
        b_e: fopts.b_e,
        n_phases: fopts.n_phases,
        baseline,
        clamped,
        calibration_dt: calibration.dt,
        linearity: LinearityCheck { omega, s_full, s_half, relative_deviation },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_schedule::constant_schedule;
    use crate::propagator::real_state;
    use crate::spin_algebra::{HalfInt, HyperfineSystem, StateLabel};

    fn setup() -> (ZeemanModel, CVector) {
        let m = ZeemanModel::projected_block(&HyperfineSystem::barium_137(), HalfInt::from_doubled(2)).unwrap();
        let psi = real_state(
            m.labels(),
            &[(StateLabel::fm(1, -1), (1.0f64 / 3.0).sqrt()), (StateLabel::fm(1, 1), (2.0f64 / 3.0).sqrt())],
        )
        .unwrap();
        (m, psi)
    }

    #[test]
    fn static_tone_without_decoupling_matches_dephasing() {
        let (m, psi) = setup();
        let t_f = 20.0;
        let s = constant_schedule([0.0, 0.0, 1.0], t_f).unwrap();
        let cal = calibrate_phases(&m, &s, &PropagationOptions::default(), 1e-3).unwrap();
        let gamma = m.gyromagnetic_ratio().unwrap();
        for b_e in [1e-4, 1e-3, 1e-2] {
            let tone = NoiseTone::new(b_e, 0.0, 0.0);
            let inf = memory_infidelity(&m, &s, &tone, &psi, &cal, &PropagationOptions::default()).unwrap();
            // 4 p₋ p₊ sin²(γ B_e t).
            let expect = 4.0 * (1.0 / 3.0) * (2.0 / 3.0) * (gamma * b_e * t_f).sin().powi(2);
            assert!((inf - expect).abs() < 1e-6 * expect.max(1e-6), "{inf} vs {expect}");
        }
    }

    #[test]
    fn unprotected_response_is_sinc_squared() {
        let (m, psi) = setup();
        let t_f = 10.0;
        let s = constant_schedule([0.0, 0.0, 1.0], t_f).unwrap();
        let grid = [0.0, 0.1, 0.45, 1.3];
        let curve = filter_response(&m, &s, &psi, &grid, &FilterOptions::default()).unwrap();
        assert_eq!(curve.scheme, SchemeTag::None);
        let gamma = m.gyromagnetic_ratio().unwrap();
        for (w, v) in grid.iter().zip(&curve.s_values) {
            // Phase average of (γ ∫ cos(ωt + θ))²: ½ γ² (2 sin(ωT/2)/ω)².
            let int = if *w == 0.0 { t_f } else { 2.0 * (w * t_f / 2.0).sin() / w };
            let expect = 4.0 * (2.0 / 9.0) * 0.5 * gamma * gamma * int * int;
            assert!((v - expect).abs() < 1e-3 * expect, "ω={w}: {v} vs {expect}");
        }
        assert!(curve.linearity.relative_deviation < 0.05);
    }

    #[test]
    fn rejects_bad_options() {
        let (m, psi) = setup();
        let s = constant_schedule([0.0, 0.0, 1.0], 1.0).unwrap();
        let bad = FilterOptions { b_e: 0.0, ..FilterOptions::default() };
        assert!(filter_response(&m, &s, &psi, &[0.1], &bad).is_err());
        assert!(filter_response(&m, &s, &psi, &[], &FilterOptions::default()).is_err());
        let none = FilterOptions { n_phases: 0, ..FilterOptions::default() };
        assert!(filter_response(&m, &s, &psi, &[0.1], &none).is_err());
    }
}
