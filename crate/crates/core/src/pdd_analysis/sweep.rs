use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::field_schedule::{continuous_pdd_schedule, pulsed_pdd_schedule, FieldSchedule, ReturnMode};
use crate::linalg::CVector;
use crate::propagator::{leakage, propagate, PropagationOptions};
use crate::spin_algebra::{StateLabel, ZeemanModel};

/// Schedule family swept over `B_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SweepScheme {
    Pulsed {
        tau: f64,
        t_center: f64,
        t_f: f64,
        #[serde(rename = "return")]
        return_mode: ReturnMode,
    },
    Continuous {
        omega_r: f64,
        t_f: f64,
    },
}

impl SweepScheme {
    pub fn build(&self, b_t: f64) -> Result<FieldSchedule, AnalysisError> {
        Ok(match *self {
            SweepScheme::Pulsed { tau, t_center, t_f, return_mode } => pulsed_pdd_schedule(b_t, tau, t_center, t_f, return_mode)?,
            SweepScheme::Continuous { omega_r, t_f } => continuous_pdd_schedule(b_t, omega_r, t_f)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub b_t: f64,
    pub leakage: Option<f64>,
    pub error: Option<String>,
}

/// Final leakage out of `subspace` for each `B_t`, computed in parallel and
/// returned in grid order. A failure at one point is recorded on that point.
pub fn leakage_sweep(
    model: &ZeemanModel,
    scheme: &SweepScheme,
    b_grid: &[f64],
    psi0: &CVector,
    subspace: &[StateLabel],
    opts: &PropagationOptions,
) -> Vec<SweepPoint> {
    b_grid
        .par_iter()
        .map(|&b_t| {
            let run = || -> Result<f64, AnalysisError> {
                let s = scheme.build(b_t)?;
                let r = propagate(model, &s, psi0, opts)?;
                Ok(leakage(&r.final_state.amplitudes, model.labels(), subspace)?)
            };
            match run() {
                Ok(l) => SweepPoint { b_t, leakage: Some(l), error: None },
                Err(e) => SweepPoint { b_t, leakage: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

/// Coarse shape of a leakage curve that oscillates on top of its decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    /// Least-squares slope of `log L` against `log B_t`.
    pub log_slope: f64,
    /// Largest leakage in each octave of `B_t`, lowest octave first.
    pub octave_maxima: Vec<f64>,
    /// Whether `octave_maxima` never increases.
    pub envelope_decreasing: bool,
}

/// Fits the trend of successful sweep points with positive leakage above `floor`.
pub fn leakage_trend(points: &[SweepPoint], floor: f64) -> Option<TrendReport> {
    let mut xy: Vec<(f64, f64)> =
        points.iter().filter_map(|p| p.leakage.filter(|l| *l > floor && p.b_t > 0.0).map(|l| (p.b_t, l))).collect();
    if xy.len() < 2 {
        return None;
    }
    xy.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = xy.len() as f64;
    let lx: Vec<f64> = xy.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = xy.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let log_slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };

    let lo = xy[0].0;
    let mut octave_maxima: Vec<f64> = Vec::new();
    for (b, l) in &xy {
        let k = (b / lo).log2().floor() as usize;
        if octave_maxima.len() <= k {
            octave_maxima.resize(k + 1, f64::NAN);
        }
        octave_maxima[k] = if octave_maxima[k].is_nan() { *l } else { octave_maxima[k].max(*l) };
    }
    octave_maxima.retain(|x| !x.is_nan());
    let envelope_decreasing = octave_maxima.windows(2).all(|w| w[1] <= w[0]);
    Some(TrendReport { log_slope, octave_maxima, envelope_decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(b_t: f64, l: f64) -> SweepPoint {
        SweepPoint { b_t, leakage: Some(l), error: None }
    }

    #[test]
    fn power_law_slope() {
        let pts: Vec<_> = (1..=20).map(|k| pt(k as f64, 1e-2 / (k as f64).powi(4))).collect();
        let t = leakage_trend(&pts, 0.0).unwrap();
        assert!((t.log_slope + 4.0).abs() < 1e-9);
        assert!(t.envelope_decreasing);
        assert_eq!(t.octave_maxima.len(), 5);
    }

    #[test]
    fn oscillation_inside_an_octave_is_tolerated() {
        let pts = vec![pt(1.0, 1e-3), pt(1.5, 1e-4), pt(1.8, 5e-4), pt(2.0, 2e-5), pt(3.0, 4e-5), pt(5.0, 1e-6)];
        let t = leakage_trend(&pts, 0.0).unwrap();
        assert!(t.log_slope < 0.0);
        assert!(t.envelope_decreasing);
    }

    #[test]
    fn failed_points_are_skipped() {
        let pts = vec![pt(1.0, 1e-3), SweepPoint { b_t: 2.0, leakage: None, error: Some("x".into()) }];
        assert!(leakage_trend(&pts, 0.0).is_none());
    }
}
