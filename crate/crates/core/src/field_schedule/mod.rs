//! Time-dependent quantization fields `B(t)` in Gauss.
//!
//! A [`FieldSchedule`] is an ordered list of analytic segments tiling
//! `[0, t_f]`, plus any number of additive [`NoiseTone`]s. Each segment
//! knows its field and its time derivative in closed form, so the propagator
//! and the diabaticity estimator never differentiate numerically.
//!
//! Field angles follow `B = |B| (sin φ, 0, cos φ)`, i.e. `φ = atan2(B_x, B_z)`.

mod config;
mod profile;

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{parse_schedule_config, ReturnMode, ScheduleConfig, ScheduleKind, SCHEDULE_SCHEMA};
pub use profile::{phi_and_epsilon, AngleProfile};

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule parameter: {0}")]
    InvalidParameter(String),
    #[error("segments do not tile [0, t_f]: {0}")]
    Tiling(String),
    #[error("schedule config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("field has a y component at t = {0} μs; angles are defined only in the xz-plane")]
    OutOfPlane(f64),
    #[error("field vanishes at t = {0} μs inside a rotation segment")]
    ZeroField(f64),
    #[error("schedule was assembled from raw segments and has no descriptor")]
    NoDescriptor,
    #[error("csv export failed: {0}")]
    Csv(String),
}

/// One analytic piece of a schedule. Time inside a segment is measured from
/// its own start.
#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    /// Constant field.
    Hold { field: Vec3 },
    /// Constant-magnitude rotation in the xz-plane with the profile
    /// `φ = φ₀ + (φ₁−φ₀)(u − sin(2πu)/2π)`, `u ∈ [0, 1]`, so `φ̇` and `φ̈`
    /// vanish at both ends.
    Rotation { magnitude: f64, phi_start: f64, phi_end: f64 },
    /// Field on the z-axis, `B_z` linear from `z_start` to `z_end`.
    AxialRamp { z_start: f64, z_end: f64 },
    /// `B (sin φ, 0, cos φ)` with `φ = φ₀ + ω t`.
    Circular { magnitude: f64, phi_start: f64, omega: f64 },
    /// `B (sin²(ω t), 0, cos(ω t))` over a quarter period.
    RampOn { magnitude: f64, omega: f64 },
    /// `B (σ sin²(ω (T − t)), 0, cos(φ₀ + ω t))` over a quarter period of
    /// length `T`.
    RampOff { magnitude: f64, omega: f64, sigma: f64, phi_start: f64 },
}

impl Segment {
    /// Field and its time derivative at local time `s` of a segment lasting `len`.
    fn eval(&self, s: f64, len: f64) -> (Vec3, Vec3) {
        match *self {
            Segment::Hold { field } => (field, [0.0; 3]),
            Segment::Rotation { magnitude, phi_start, phi_end } => {
                let u = s / len;
                let span = phi_end - phi_start;
                let phi = phi_start + span * (u - (2.0 * PI * u).sin() / (2.0 * PI));
                let rate = span / len * (1.0 - (2.0 * PI * u).cos());
                let (sp, cp) = phi.sin_cos();
                ([magnitude * sp, 0.0, magnitude * cp], [magnitude * rate * cp, 0.0, -magnitude * rate * sp])
            }
            Segment::AxialRamp { z_start, z_end } => {
                let slope = (z_end - z_start) / len;
                ([0.0, 0.0, z_start + slope * s], [0.0, 0.0, slope])
            }
            Segment::Circular { magnitude, phi_start, omega } => {
                let (sp, cp) = (phi_start + omega * s).sin_cos();
                ([magnitude * sp, 0.0, magnitude * cp], [magnitude * omega * cp, 0.0, -magnitude * omega * sp])
            }
            Segment::RampOn { magnitude, omega } => {
                let (st, ct) = (omega * s).sin_cos();
                ([magnitude * st * st, 0.0, magnitude * ct], [2.0 * magnitude * omega * st * ct, 0.0, -magnitude * omega * st])
            }
            Segment::RampOff { magnitude, omega, sigma, phi_start } => {
                let (sp, cp) = (omega * (len - s)).sin_cos();
                let (sz, cz) = (phi_start + omega * s).sin_cos();
                (
                    [magnitude * sigma * sp * sp, 0.0, magnitude * cz],
                    [-2.0 * magnitude * sigma * omega * sp * cp, 0.0, -magnitude * omega * sz],
                )
            }
        }
    }

    /// Whether the field direction can change inside this segment.
    pub fn rotates(&self) -> bool {
        !matches!(self, Segment::Hold { .. } | Segment::AxialRamp { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub segment: Segment,
}

impl TimedSegment {
    pub fn new(t_start: f64, t_end: f64, segment: Segment) -> Self {
        Self { t_start, t_end, segment }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn field(&self, t: f64) -> Vec3 {
        self.segment.eval(t - self.t_start, self.duration()).0
    }

    pub fn field_rate(&self, t: f64) -> Vec3 {
        self.segment.eval(t - self.t_start, self.duration()).1
    }

    /// `φ̇ = (B_z Ḃ_x − B_x Ḃ_z)/|B|²`; zero for segments that keep the
    /// direction fixed, including where the field crosses zero on-axis.
    pub fn angle_rate(&self, t: f64) -> f64 {
        if !self.segment.rotates() {
            return 0.0;
        }
        let (b, db) = self.segment.eval(t - self.t_start, self.duration());
        let n2 = b[0] * b[0] + b[2] * b[2];
        if n2 == 0.0 {
            return f64::NAN;
        }
        (b[2] * db[0] - b[0] * db[2]) / n2
    }
}

/// An additive tone `B_e cos(ω_e t + θ) p̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTone {
    /// `B_e`, Gauss.
    pub amplitude: f64,
    /// `ω_e`, rad/μs.
    pub omega: f64,
    /// `θ`, rad.
    #[serde(default)]
    pub phase: f64,
    #[serde(default = "z_axis")]
    pub polarization: Vec3,
}

fn z_axis() -> Vec3 {
    [0.0, 0.0, 1.0]
}

impl NoiseTone {
    /// A z-polarized tone.
    pub fn new(amplitude: f64, omega: f64, phase: f64) -> Self {
        Self { amplitude, omega, phase, polarization: z_axis() }
    }

    pub fn with_polarization(mut self, p: Vec3) -> Self {
        self.polarization = p;
        self
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(ScheduleError::InvalidParameter(format!("noise amplitude {} must be ≥ 0", self.amplitude)));
        }
        if !self.omega.is_finite() || !self.phase.is_finite() {
            return Err(ScheduleError::InvalidParameter("noise frequency and phase must be finite".into()));
        }
        let n = self.polarization.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(ScheduleError::InvalidParameter(format!("noise polarization has norm {n}, expected 1")));
        }
        Ok(())
    }

    fn sample(&self, t: f64) -> (f64, f64) {
        let arg = self.omega * t + self.phase;
        (self.amplitude * arg.cos(), -self.amplitude * self.omega * arg.sin())
    }

    fn sort_key(&self) -> [f64; 6] {
        [self.omega, self.phase, self.amplitude, self.polarization[0], self.polarization[1], self.polarization[2]]
    }
}

/// Immutable field trajectory over `[0, t_f]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSchedule {
    segments: Vec<TimedSegment>,
    noise: Vec<NoiseTone>,
    descriptor: Option<ScheduleKind>,
}

impl FieldSchedule {
    /// Validates that `segments` tile `[0, t_f]` contiguously.
    pub fn from_segments(segments: Vec<TimedSegment>) -> Result<Self, ScheduleError> {
        let first = segments.first().ok_or_else(|| ScheduleError::Tiling("no segments".into()))?;
        if first.t_start != 0.0 {
            return Err(ScheduleError::Tiling(format!("first segment starts at {}", first.t_start)));
        }
        for (k, s) in segments.iter().enumerate() {
            if !(s.t_end > s.t_start) || !s.t_end.is_finite() {
                return Err(ScheduleError::Tiling(format!("segment {k} spans [{}, {}]", s.t_start, s.t_end)));
            }
            if k > 0 && segments[k - 1].t_end != s.t_start {
                return Err(ScheduleError::Tiling(format!(
                    "gap or overlap between segment {} (ends {}) and {k} (starts {})",
                    k - 1,
                    segments[k - 1].t_end,
                    s.t_start
                )));
            }
        }
        Ok(Self { segments, noise: Vec::new(), descriptor: None })
    }

    pub(crate) fn with_descriptor(mut self, kind: ScheduleKind) -> Self {
        self.descriptor = Some(kind);
        self
    }

    /// Concatenates schedules in time.
    pub fn concat(parts: &[FieldSchedule]) -> Result<Self, ScheduleError> {
        let mut out = Vec::new();
        let mut offset = 0.0;
        for p in parts {
            if !p.noise.is_empty() {
                return Err(ScheduleError::InvalidParameter("sequence parts must be noise-free".into()));
            }
            for s in &p.segments {
                out.push(TimedSegment::new(s.t_start + offset, s.t_end + offset, s.segment.clone()));
            }
            offset += p.duration();
            // Keep the tiling exact despite rounding in the sums above.
            if let Some(last) = out.last_mut() {
                last.t_end = offset;
            }
        }
        for k in 1..out.len() {
            out[k].t_start = out[k - 1].t_end;
        }
        Self::from_segments(out)
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    pub fn segments(&self) -> &[TimedSegment] {
        &self.segments
    }

    pub fn noise(&self) -> &[NoiseTone] {
        &self.noise
    }

    pub fn descriptor(&self) -> Option<&ScheduleKind> {
        self.descriptor.as_ref()
    }

    /// The same schedule without noise tones.
    pub fn noise_free(&self) -> Self {
        Self { noise: Vec::new(), ..self.clone() }
    }

    /// Index of the segment containing `t`; boundaries belong to the later
    /// segment, except `t_f`.
    pub fn segment_index(&self, t: f64) -> usize {
        let k = self.segments.partition_point(|s| s.t_start <= t);
        k.saturating_sub(1).min(self.segments.len() - 1)
    }

    pub fn segment_at(&self, t: f64) -> &TimedSegment {
        &self.segments[self.segment_index(t)]
    }

    /// Noise-free field at `t`.
    pub fn base_field(&self, t: f64) -> Vec3 {
        self.segment_at(t).field(t)
    }

    /// Field including noise tones.
    pub fn field(&self, t: f64) -> Vec3 {
        let mut b = self.base_field(t);
        for tone in &self.noise {
            let (v, _) = tone.sample(t);
            for k in 0..3 {
                b[k] += v * tone.polarization[k];
            }
        }
        b
    }

    /// `dB/dt` including noise tones.
    pub fn field_rate(&self, t: f64) -> Vec3 {
        let mut d = self.segment_at(t).field_rate(t);
        for tone in &self.noise {
            let (_, dv) = tone.sample(t);
            for k in 0..3 {
                d[k] += dv * tone.polarization[k];
            }
        }
        d
    }

    /// Noise-free `φ̇` at `t`.
    pub fn angle_rate(&self, t: f64) -> f64 {
        self.segment_at(t).angle_rate(t)
    }

    /// Whether the noise-free field and its first derivative are continuous
    /// across every internal boundary.
    pub fn is_c1(&self) -> bool {
        self.segments.windows(2).all(|w| {
            let t = w[0].t_end;
            let scale = self.field_scale();
            let rate_scale = scale / w[0].duration().min(w[1].duration());
            close3(w[0].field(t), w[1].field(t), 1e-9 * scale)
                && close3(w[0].field_rate(t), w[1].field_rate(t), 1e-9 * rate_scale)
        })
    }

    /// Whether `φ̇` is continuous across every internal boundary. Weaker than
    /// [`is_c1`](Self::is_c1): an on-axis ramp next to a finished rotation
    /// qualifies.
    pub fn is_angle_c1(&self) -> bool {
        self.segments.windows(2).all(|w| {
            let t = w[0].t_end;
            let (a, b) = (w[0].angle_rate(t), w[1].angle_rate(t));
            let scale = (a.abs() + b.abs()).max(1.0 / w[0].duration().min(w[1].duration()));
            (a - b).abs() <= 1e-9 * scale
        })
    }

    fn field_scale(&self) -> f64 {
        let mut m: f64 = 1e-300;
        for s in &self.segments {
            for t in [s.t_start, 0.5 * (s.t_start + s.t_end), s.t_end] {
                m = m.max(norm3(s.field(t)));
            }
        }
        m
    }

    /// Writes `n_samples` uniformly spaced samples (endpoints included) as
    /// CSV with columns `t,Bx,By,Bz`.
    pub fn write_csv<W: Write>(&self, out: W, n_samples: usize) -> Result<(), ScheduleError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| ScheduleError::Csv(e.to_string());
        w.write_record(["t", "Bx", "By", "Bz"]).map_err(err)?;
        let n = n_samples.max(2);
        for k in 0..n {
            let t = self.duration() * k as f64 / (n - 1) as f64;
            let b = self.field(t);
            w.write_record([t, b[0], b[1], b[2]].map(|x| format!("{x:.12e}"))).map_err(err)?;
        }
        w.flush().map_err(|e| ScheduleError::Csv(e.to_string()))
    }
}

fn norm3(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn close3(a: Vec3, b: Vec3, tol: f64) -> bool {
    (0..3).all(|k| (a[k] - b[k]).abs() <= tol)
}

fn positive(name: &str, x: f64) -> Result<(), ScheduleError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ScheduleError::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Spin-echo schedule: hold `+z`, rotate through `x` to `−z` over a window
/// of length `tau` centred on `t_center`, then return to `+z` along the
/// z-axis and hold until `t_f`.
pub fn pulsed_pdd_schedule(
    b_t: f64,
    tau: f64,
    t_center: f64,
    t_f: f64,
    return_mode: ReturnMode,
) -> Result<FieldSchedule, ScheduleError> {
    positive("B_t", b_t)?;
    positive("tau", tau)?;
    positive("t_f", t_f)?;
    let w0 = t_center - 0.5 * tau;
    let w1 = t_center + 0.5 * tau;
    if w0 < -1e-12 || w1 > t_f + 1e-12 {
        return Err(ScheduleError::InvalidParameter(format!("rotation window [{w0}, {w1}] does not fit in [0, {t_f}]")));
    }
    let (w0, w1) = (w0.max(0.0), w1.min(t_f));
    let ret = match return_mode {
        ReturnMode::Instant => 0.0,
        ReturnMode::Linear(d) => {
            positive("return duration", d)?;
            d
        }
    };
    if w1 + ret > t_f + 1e-12 {
        return Err(ScheduleError::InvalidParameter(format!("return leg ends at {} after t_f = {t_f}", w1 + ret)));
    }
    let up = Segment::Hold { field: [0.0, 0.0, b_t] };
    let mut segs = Vec::new();
    if w0 > 0.0 {
        segs.push(TimedSegment::new(0.0, w0, up.clone()));
    }
    segs.push(TimedSegment::new(w0, w1, Segment::Rotation { magnitude: b_t, phi_start: 0.0, phi_end: PI }));
    let mut t = w1;
    if ret > 0.0 {
        let end = (w1 + ret).min(t_f);
        segs.push(TimedSegment::new(w1, end, Segment::AxialRamp { z_start: -b_t, z_end: b_t }));
        t = end;
    }
    if t < t_f {
        segs.push(TimedSegment::new(t, t_f, up));
    }
    let kind = ScheduleKind::Pulsed { b_t, tau, t_center, t_f, return_mode: Some(return_mode) };
    Ok(FieldSchedule::from_segments(segs)?.with_descriptor(kind))
}

/// Continuous rotation `B_t (sin ω_r t, 0, cos ω_r t)` with `sin²` shaping of
/// `B_x` over the first and last quarter periods.
pub fn continuous_pdd_schedule(b_t: f64, omega_r: f64, t_f: f64) -> Result<FieldSchedule, ScheduleError> {
    positive("B_t", b_t)?;
    positive("omega_r", omega_r)?;
    positive("t_f", t_f)?;
    let quarter = 0.5 * PI / omega_r;
    if t_f < 2.0 * quarter * (1.0 - 1e-12) {
        return Err(ScheduleError::InvalidParameter(format!(
            "t_f = {t_f} is shorter than the two ramp quarter-periods ({})",
            2.0 * quarter
        )));
    }
    let t_off = (t_f - quarter).max(quarter);
    let mut segs = vec![TimedSegment::new(0.0, quarter, Segment::RampOn { magnitude: b_t, omega: omega_r })];
    if t_off > quarter {
        segs.push(TimedSegment::new(quarter, t_off, Segment::Circular { magnitude: b_t, phi_start: 0.5 * PI, omega: omega_r }));
    }
    let phi_j = omega_r * t_off;
    segs.push(TimedSegment::new(
        t_off,
        t_f,
        Segment::RampOff { magnitude: b_t, omega: omega_r, sigma: phi_j.sin(), phi_start: phi_j },
    ));
    let kind = ScheduleKind::Continuous { b_t, period: None, omega_r: Some(omega_r), t_f };
    Ok(FieldSchedule::from_segments(segs)?.with_descriptor(kind))
}

/// Static field over `[0, t_f]`.
pub fn constant_schedule(field: Vec3, t_f: f64) -> Result<FieldSchedule, ScheduleError> {
    positive("t_f", t_f)?;
    if field.iter().any(|x| !x.is_finite()) {
        return Err(ScheduleError::InvalidParameter("field must be finite".into()));
    }
    let kind = ScheduleKind::Constant { field, t_f };
    Ok(FieldSchedule::from_segments(vec![TimedSegment::new(0.0, t_f, Segment::Hold { field })])?.with_descriptor(kind))
}

/// Adds a tone. Tones are kept in a canonical order so that the result does
/// not depend on the order in which they were added.
pub fn add_noise(schedule: &FieldSchedule, tone: NoiseTone) -> Result<FieldSchedule, ScheduleError> {
    tone.validate()?;
    let mut out = schedule.clone();
    out.noise.push(tone);
    out.noise.sort_by(|a, b| {
        a.sort_key()
            .iter()
            .zip(b.sort_key().iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulsed() -> FieldSchedule {
        pulsed_pdd_schedule(10.0, 2.0, 1.5, 4.0, ReturnMode::Linear(1.0)).unwrap()
    }

    fn numeric_rate(s: &FieldSchedule, t: f64) -> Vec3 {
        let h = 1e-6;
        let (a, b) = (s.field(t + h), s.field(t - h));
        [0, 1, 2].map(|k| (a[k] - b[k]) / (2.0 * h))
    }

    #[test]
    fn pulsed_boundary_fields() {
        let s = pulsed();
        assert_eq!(s.field(0.0), [0.0, 0.0, 10.0]);
        let mid = s.field(1.5);
        assert!((mid[0] - 10.0).abs() < 1e-12 && mid[2].abs() < 1e-12);
        let end = s.field(2.5);
        assert!(end[0].abs() < 1e-12 && (end[2] + 10.0).abs() < 1e-12);
        assert_eq!(s.field(4.0), [0.0, 0.0, 10.0]);
    }

    #[test]
    fn pulsed_window_has_constant_magnitude() {
        let s = pulsed();
        for k in 0..=200 {
            let t = 0.5 + 2.0 * k as f64 / 200.0;
            assert!((norm3(s.field(t)) - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn return_leg_stays_on_axis() {
        let s = pulsed();
        for k in 0..=100 {
            let b = s.field(2.5 + k as f64 / 100.0);
            assert_eq!((b[0], b[1]), (0.0, 0.0));
        }
        let b = s.field(3.0);
        assert!(b[2].abs() < 1e-12);
    }

    #[test]
    fn analytic_rates_match_finite_differences() {
        let c = continuous_pdd_schedule(10.0, 2.0 * PI / 10.0, 100.0).unwrap();
        for s in [pulsed(), c] {
            for k in 1..50 {
                let t = s.duration() * (k as f64 + 0.37) / 50.0;
                let (a, n) = (s.field_rate(t), numeric_rate(&s, t));
                for i in 0..3 {
                    assert!((a[i] - n[i]).abs() < 1e-5 * (1.0 + a[i].abs()), "t = {t}: {a:?} vs {n:?}");
                }
            }
        }
    }

    #[test]
    fn endpoints_have_zero_rate() {
        let c = continuous_pdd_schedule(10.0, 2.0 * PI / 10.0, 100.0).unwrap();
        for s in [pulsed(), c] {
            for t in [0.0, s.duration()] {
                assert!(norm3(s.field_rate(t)) < 1e-12, "Ḃ({t}) = {:?}", s.field_rate(t));
            }
            let h = 1e-7;
            let d0 = norm3([0, 1, 2].map(|k| (s.field(h)[k] - s.field(0.0)[k]) / h));
            assert!(d0 < 1e-4);
        }
    }

    #[test]
    fn continuous_bulk_has_constant_magnitude_and_rate() {
        let w = 2.0 * PI / 10.0;
        let s = continuous_pdd_schedule(10.0, w, 100.0).unwrap();
        for k in 0..=300 {
            let t = 2.5 + 95.0 * k as f64 / 300.0;
            assert!((norm3(s.field(t)) - 10.0).abs() < 1e-12);
            assert!((s.angle_rate(t) - w).abs() < 1e-12);
        }
        assert!(s.is_c1());
        let end = s.field(100.0);
        assert!(end[0].abs() < 1e-12 && (end[2] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn continuous_ramp_dips_magnitude() {
        let w = 2.0 * PI / 10.0;
        let s = continuous_pdd_schedule(1.0, w, 100.0).unwrap();
        let min = (0..1000).map(|k| norm3(s.field(2.5 * k as f64 / 1000.0))).fold(f64::INFINITY, f64::min);
        assert!((min - 0.75f64.sqrt()).abs() < 1e-3, "min |B| = {min}");
    }

    #[test]
    fn continuous_is_c1_only_for_whole_half_turns() {
        assert!(!continuous_pdd_schedule(1.0, 1.0, 7.0).unwrap().is_c1());
        assert!(continuous_pdd_schedule(1.0, 1.0, 3.0 * PI).unwrap().is_c1());
    }

    #[test]
    fn constructor_errors() {
        assert!(pulsed_pdd_schedule(10.0, 2.0, 0.5, 4.0, ReturnMode::Instant).is_err());
        assert!(pulsed_pdd_schedule(10.0, 0.0, 2.0, 4.0, ReturnMode::Instant).is_err());
        assert!(pulsed_pdd_schedule(10.0, 2.0, 2.5, 4.0, ReturnMode::Linear(1.0)).is_err());
        assert!(continuous_pdd_schedule(1.0, 1.0, 3.0).is_err());
        assert!(continuous_pdd_schedule(1.0, -1.0, 30.0).is_err());
    }

    #[test]
    fn pulsed_angle_rate_is_continuous_but_field_is_not_c1() {
        let s = pulsed();
        assert!(s.is_angle_c1());
        assert!(!s.is_c1());
        let instant = pulsed_pdd_schedule(10.0, 2.0, 1.5, 4.0, ReturnMode::Instant).unwrap();
        assert!(instant.is_angle_c1());
    }

    #[test]
    fn noise_is_additive_and_order_independent() {
        let base = constant_schedule([0.0, 0.0, 3.0], 10.0).unwrap();
        let zero = add_noise(&base, NoiseTone::new(0.0, 1.0, 0.3)).unwrap();
        for k in 0..20 {
            let t = k as f64 * 0.5;
            assert_eq!(zero.field(t), base.field(t));
        }
        let one = add_noise(&base, NoiseTone::new(0.25, 0.0, 0.0)).unwrap();
        assert_eq!(one.field(0.0), [0.0, 0.0, 3.25]);
        let a = NoiseTone::new(0.1, 2.0, 0.4);
        let b = NoiseTone::new(0.3, 0.7, 1.0).with_polarization([1.0, 0.0, 0.0]);
        let ab = add_noise(&add_noise(&base, a.clone()).unwrap(), b.clone()).unwrap();
        let ba = add_noise(&add_noise(&base, b).unwrap(), a).unwrap();
        for k in 0..100 {
            let t = k as f64 * 0.1;
            assert_eq!(ab.field(t), ba.field(t));
        }
        assert!(add_noise(&base, NoiseTone::new(-1.0, 1.0, 0.0)).is_err());
        assert!(add_noise(&base, NoiseTone::new(1.0, 1.0, 0.0).with_polarization([1.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn tiling_is_enforced() {
        let hold = Segment::Hold { field: [0.0, 0.0, 1.0] };
        assert!(FieldSchedule::from_segments(vec![]).is_err());
        assert!(FieldSchedule::from_segments(vec![TimedSegment::new(0.5, 1.0, hold.clone())]).is_err());
        assert!(FieldSchedule::from_segments(vec![
            TimedSegment::new(0.0, 1.0, hold.clone()),
            TimedSegment::new(1.1, 2.0, hold.clone())
        ])
        .is_err());
        let ok = FieldSchedule::from_segments(vec![TimedSegment::new(0.0, 1.0, hold.clone()), TimedSegment::new(1.0, 2.0, hold)])
            .unwrap();
        assert_eq!(ok.segment_index(1.0), 1);
        assert_eq!(ok.segment_index(2.0), 1);
        assert_eq!(ok.segment_index(0.0), 0);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let mut buf = Vec::new();
        pulsed().write_csv(&mut buf, 5).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,Bx,By,Bz");
        assert_eq!(lines.len(), 6);
    }
}
