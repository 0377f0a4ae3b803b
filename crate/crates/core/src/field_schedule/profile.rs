use std::f64::consts::PI;

use super::{FieldSchedule, ScheduleError, Segment};
use crate::quadrature::adaptive_simpson;
use crate::units::{BOHR_MAGNETON, ELECTRON_G_FACTOR};

/// Field angle and accumulated Zeeman phase sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleProfile {
    pub times: Vec<f64>,
    /// Quantization-axis angle, continuous, starting from the direction of
    /// `B(0)`. On-axis segments keep the axis and let the field change sign
    /// along it.
    pub phi: Vec<f64>,
    /// `φ̇`, rad/μs.
    pub phi_rate: Vec<f64>,
    /// `ε = μ_B g_J ∫|B| dt`, rad.
    pub epsilon: Vec<f64>,
    /// `∫|B| dt`, G·μs.
    pub field_integral: Vec<f64>,
    /// `∫ B·n̂(φ) dt` with `n̂ = (sin φ, 0, cos φ)`, G·μs. Differs from
    /// `field_integral` where the field points against the axis.
    pub signed_field_integral: Vec<f64>,
}

impl AngleProfile {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Grid spacing.
    pub fn step(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Samples `φ(t)` and `ε(t)` of the noise-free field at `n_samples` uniform
/// times including both endpoints.
///
/// The grid must resolve the rotation: a step must turn the field by well
/// under π/2.
pub fn phi_and_epsilon(schedule: &FieldSchedule, n_samples: usize) -> Result<AngleProfile, ScheduleError> {
    for s in schedule.segments() {
        if let Segment::Hold { field } = s.segment {
            if field[1] != 0.0 {
                return Err(ScheduleError::OutOfPlane(s.t_start));
            }
        }
    }
    let n = n_samples.max(2);
    let tf = schedule.duration();
    let times: Vec<f64> = (0..n).map(|k| tf * k as f64 / (n - 1) as f64).collect();

    let mut phi = Vec::with_capacity(n);
    let mut phi_rate = Vec::with_capacity(n);
    for (k, &t) in times.iter().enumerate() {
        let seg = schedule.segment_at(t);
        let rate = seg.angle_rate(t);
        if rate.is_nan() {
            return Err(ScheduleError::ZeroField(t));
        }
        let b = seg.field(t);
        let mag = b[0].hypot(b[2]);
        let value = if k == 0 {
            if mag > 0.0 {
                b[0].atan2(b[2])
            } else {
                0.0
            }
        } else {
            let prev = phi[k - 1];
            if mag > 0.0 {
                let predicted = prev + 0.5 * (phi_rate[k - 1] + rate) * (t - times[k - 1]);
                nearest_branch(b[0].atan2(b[2]), predicted)
            } else {
                prev
            }
        };
        phi.push(value);
        phi_rate.push(rate);
    }

    let mut field_integral = vec![0.0; n];
    let mut signed = vec![0.0; n];
    for k in 1..n {
        let (a, b) = (times[k - 1], times[k]);
        let (abs_part, signed_part) = integrate_interval(schedule, a, b, phi[k - 1]);
        field_integral[k] = field_integral[k - 1] + abs_part;
        signed[k] = signed[k - 1] + signed_part;
    }
    let gamma = BOHR_MAGNETON * ELECTRON_G_FACTOR;
    let epsilon = field_integral.iter().map(|x| gamma * x).collect();
    Ok(AngleProfile { times, phi, phi_rate, epsilon, field_integral, signed_field_integral: signed })
}

/// `atan2` branch modulo π closest to `target`.
fn nearest_branch(angle: f64, target: f64) -> f64 {
    angle + PI * ((target - angle) / PI).round()
}

/// `∫|B|` and `∫B·n̂` over `[a, b]`, split at segment boundaries.
fn integrate_interval(schedule: &FieldSchedule, a: f64, b: f64, phi_axis: f64) -> (f64, f64) {
    let mut abs_total = 0.0;
    let mut signed_total = 0.0;
    let mut lo = a;
    while lo < b {
        let seg = schedule.segment_at(lo);
        let hi = seg.t_end.min(b);
        if hi <= lo {
            break;
        }
        let tol = 1e-13 * (hi - lo) * schedule_scale(seg.field(lo), seg.field(hi));
        let norm = |t: f64| {
            let f = seg.field(t);
            (f[0] * f[0] + f[2] * f[2]).sqrt()
        };
        let abs_part = adaptive_simpson(&norm, lo, hi, tol);
        abs_total += abs_part;
        if seg.segment.rotates() {
            // The axis follows the field: the sign of B·n̂ is fixed across the piece.
            let f = seg.field(0.5 * (lo + hi));
            let dot = f[0] * phi_axis.sin() + f[2] * phi_axis.cos();
            signed_total += if dot < 0.0 { -abs_part } else { abs_part };
        } else {
            let (s, c) = phi_axis.sin_cos();
            let proj = |t: f64| {
                let f = seg.field(t);
                f[0] * s + f[2] * c
            };
            signed_total += adaptive_simpson(&proj, lo, hi, tol);
        }
        lo = hi;
    }
    (abs_total, signed_total)
}

fn schedule_scale(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().chain(b.iter()).fold(1.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_schedule::{constant_schedule, continuous_pdd_schedule, pulsed_pdd_schedule, ReturnMode, TimedSegment};

    #[test]
    fn constant_field_has_linear_epsilon() {
        let s = constant_schedule([0.0, 0.0, 3.0], 10.0).unwrap();
        let p = phi_and_epsilon(&s, 101).unwrap();
        let slope = BOHR_MAGNETON * ELECTRON_G_FACTOR * 3.0;
        for k in 0..p.len() {
            assert_eq!(p.phi[k], 0.0);
            assert!((p.epsilon[k] - slope * p.times[k]).abs() < 1e-9 * slope * 10.0);
        }
    }

    #[test]
    fn pulsed_angles_run_from_zero_to_pi() {
        let s = pulsed_pdd_schedule(10.0, 2.0, 1.5, 4.0, ReturnMode::Linear(1.0)).unwrap();
        let p = phi_and_epsilon(&s, 801).unwrap();
        // t = 0.5 and t = 2.5 sit on grid points 100 and 500.
        assert!(p.phi[100].abs() < 1e-12);
        assert!((p.phi[500] - PI).abs() < 1e-12);
        assert!((p.phi[800] - PI).abs() < 1e-12);
        assert!(p.epsilon.windows(2).all(|w| w[1] >= w[0]));
        // The return leg integrates B·n̂ = −B_z symmetric around zero, then +z hold counts negative.
        let ret_start = p.signed_field_integral[500];
        let ret_end = p.signed_field_integral[700];
        assert!((ret_end - ret_start).abs() < 1e-9);
        assert!((p.signed_field_integral[800] - ret_end + 5.0).abs() < 1e-9);
    }

    #[test]
    fn continuous_bulk_rate_is_constant() {
        let w = 2.0 * PI / 10.0;
        let s = continuous_pdd_schedule(10.0, w, 100.0).unwrap();
        let p = phi_and_epsilon(&s, 2001).unwrap();
        for k in 100..1900 {
            assert!((p.phi_rate[k] - w).abs() < 1e-12);
        }
        assert!((p.phi[2000] - w * 100.0).abs() < 1e-9);
        for (a, b) in p.field_integral.iter().zip(&p.signed_field_integral) {
            assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn out_of_plane_and_zero_field_rejected() {
        let s = constant_schedule([0.0, 1.0, 1.0], 1.0).unwrap();
        assert!(matches!(phi_and_epsilon(&s, 10), Err(ScheduleError::OutOfPlane(_))));
        let z = FieldSchedule::from_segments(vec![TimedSegment::new(
            0.0,
            1.0,
            Segment::Rotation { magnitude: 0.0, phi_start: 0.0, phi_end: 1.0 },
        )])
        .unwrap();
        assert!(matches!(phi_and_epsilon(&z, 10), Err(ScheduleError::ZeroField(_))));
    }
}
