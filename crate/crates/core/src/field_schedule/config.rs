//! JSON schedule descriptors.
//!
//! ```json
//! { "schema": 1, "kind": "pulsed", "B_t": 10, "tau": 2, "t_center": 50, "t_f": 100,
//!   "return": {"linear": 5}, "noise": [{"amplitude": 1e-5, "omega": 0.1}] }
//! ```
//!
//! Kinds: `pulsed`, `continuous` (`period` or `omega_r`), `constant`
//! (`field`), and `sequence` (`parts`, concatenated in time). `schema` and
//! `noise` are optional; unknown keys are rejected.

use std::f64::consts::PI;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::{
    add_noise, constant_schedule, continuous_pdd_schedule, pulsed_pdd_schedule, FieldSchedule, NoiseTone, ScheduleError, Vec3,
};

pub const SCHEDULE_SCHEMA: u32 = 1;

/// How the pulsed schedule brings the field from `−z` back to `+z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ReturnMode {
    /// Jump back at the end of the rotation window.
    Instant,
    /// Linear `B_z` ramp lasting the given time, μs.
    Linear(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleKind {
    Pulsed {
        #[serde(rename = "B_t")]
        b_t: f64,
        tau: f64,
        t_center: f64,
        t_f: f64,
        /// Defaults to a linear ramp of `tau/2`.
        #[serde(rename = "return", default, skip_serializing_if = "Option::is_none")]
        return_mode: Option<ReturnMode>,
    },
    Continuous {
        #[serde(rename = "B_t")]
        b_t: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_r: Option<f64>,
        t_f: f64,
    },
    Constant {
        field: Vec3,
        t_f: f64,
    },
    Sequence {
        parts: Vec<ScheduleKind>,
    },
}

impl ScheduleKind {
    pub fn build(&self) -> Result<FieldSchedule, ScheduleError> {
        let s = match self {
            ScheduleKind::Pulsed { b_t, tau, t_center, t_f, return_mode } => {
                let mode = return_mode.unwrap_or(ReturnMode::Linear(0.5 * tau));
                pulsed_pdd_schedule(*b_t, *tau, *t_center, *t_f, mode)?
            }
            ScheduleKind::Continuous { b_t, period, omega_r, t_f } => {
                let w = match (period, omega_r) {
                    (Some(p), None) => {
                        if !(*p > 0.0) {
                            return Err(ScheduleError::InvalidParameter(format!("period must be positive, got {p}")));
                        }
                        2.0 * PI / p
                    }
                    (None, Some(w)) => *w,
                    _ => {
                        return Err(ScheduleError::InvalidParameter(
                            "continuous schedule needs exactly one of `period` and `omega_r`".into(),
                        ))
                    }
                };
                continuous_pdd_schedule(*b_t, w, *t_f)?
            }
            ScheduleKind::Constant { field, t_f } => constant_schedule(*field, *t_f)?,
            ScheduleKind::Sequence { parts } => {
                if parts.is_empty() {
                    return Err(ScheduleError::InvalidParameter("sequence has no parts".into()));
                }
                let built = parts.iter().map(|p| p.build()).collect::<Result<Vec<_>, _>>()?;
                FieldSchedule::concat(&built)?
            }
        };
        Ok(s.with_descriptor(self.clone()))
    }
}

/// A schedule descriptor plus noise tones.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub noise: Vec<NoiseTone>,
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<FieldSchedule, ScheduleError> {
        let mut s = self.kind.build()?;
        for tone in &self.noise {
            s = add_noise(&s, tone.clone())?;
        }
        Ok(s)
    }

    pub fn from_value(mut value: Value) -> Result<Self, ScheduleError> {
        let obj = value.as_object_mut().ok_or_else(|| config_error(".", "expected a JSON object"))?;
        if let Some(v) = obj.remove("schema") {
            match v.as_u64() {
                Some(n) if n == u64::from(SCHEDULE_SCHEMA) => {}
                _ => return Err(config_error("schema", &format!("unsupported schema version {v}, expected {SCHEDULE_SCHEMA}"))),
            }
        }
        let noise = match obj.remove("noise") {
            None => Vec::new(),
            Some(v) => serde_path_to_error::deserialize::<_, Vec<NoiseTone>>(v)
                .map_err(|e| config_error(&join_path("noise", &e.path().to_string()), &e.inner().to_string()))?,
        };
        let kind: ScheduleKind =
            serde_path_to_error::deserialize(value).map_err(|e| config_error(&e.path().to_string(), &e.inner().to_string()))?;
        Ok(Self { kind, noise })
    }

    pub fn to_value(&self) -> Value {
        let mut v = serde_json::to_value(&self.kind).expect("descriptor serializes");
        let obj = v.as_object_mut().expect("descriptor is an object");
        obj.insert("schema".into(), Value::from(SCHEDULE_SCHEMA));
        if !self.noise.is_empty() {
            obj.insert("noise".into(), serde_json::to_value(&self.noise).expect("noise serializes"));
        }
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("value serializes")
    }
}

impl Serialize for ScheduleConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ScheduleConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        ScheduleConfig::from_value(v).map_err(serde::de::Error::custom)
    }
}

fn join_path(prefix: &str, rest: &str) -> String {
    if rest == "." || rest.is_empty() {
        prefix.to_string()
    } else if rest.starts_with('[') {
        format!("{prefix}{rest}")
    } else {
        format!("{prefix}.{rest}")
    }
}

fn config_error(path: &str, message: &str) -> ScheduleError {
    ScheduleError::Config { path: path.to_string(), message: message.to_string() }
}

/// Parses a JSON schedule descriptor and builds the schedule.
pub fn parse_schedule_config(text: &str) -> Result<FieldSchedule, ScheduleError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| config_error(".", &format!("malformed JSON at line {} column {}: {e}", e.line(), e.column())))?;
    ScheduleConfig::from_value(value)?.build()
}

impl FieldSchedule {
    /// Descriptor and noise of a schedule built from a descriptor.
    pub fn to_config(&self) -> Result<ScheduleConfig, ScheduleError> {
        let kind = self.descriptor().cloned().ok_or(ScheduleError::NoDescriptor)?;
        Ok(ScheduleConfig { kind, noise: self.noise().to_vec() })
    }

    pub fn to_json(&self) -> Result<String, ScheduleError> {
        Ok(self.to_config()?.to_json())
    }
}
