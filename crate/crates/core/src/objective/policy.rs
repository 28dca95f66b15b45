use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::Mechanism;

/// Piecewise-constant profile of the manipulated parameter.
///
/// `p(t) = p_i` on `[(i−1)T, iT)` for `i = 1..N`, and `p(t) = p_ss` for `t < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub mechanism: Mechanism,
    #[serde(rename = "T")]
    pub interval: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
    pub p_ss: f64,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Policy {
    pub fn new(mechanism: Mechanism, interval: f64, p_ss: f64, values: Vec<f64>) -> Result<Self> {
        let policy = Self {
            mechanism,
            interval,
            intervals: values.len(),
            p_ss,
            values,
            seed: None,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// `intervals` decisions all equal to `p_ss`.
    pub fn constant(mechanism: Mechanism, interval: f64, intervals: usize, p_ss: f64) -> Result<Self> {
        Self::new(mechanism, interval, p_ss, vec![p_ss; intervals])
    }

    pub fn validate(&self) -> Result<()> {
        if self.intervals == 0 {
            return Err(Error::InvalidArgument("a policy needs at least one interval".into()));
        }
        if !(self.interval.is_finite() && self.interval > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "interval length must be positive, got {}",
                self.interval
            )));
        }
        if self.values.len() != self.intervals {
            return Err(Error::InvalidArgument(format!(
                "policy declares {} intervals but holds {} values",
                self.intervals,
                self.values.len()
            )));
        }
        if !self.p_ss.is_finite() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("policy values must be finite".into()));
        }
        Ok(())
    }

    /// Horizon `t_f = N·T`.
    pub fn horizon(&self) -> f64 {
        self.intervals as f64 * self.interval
    }

    /// Same grid, new decision values.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.intervals {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                self.intervals,
                values.len()
            )));
        }
        Ok(Self {
            values: values.to_vec(),
            ..self.clone()
        })
    }

    /// Parameter in force at time `t`; the last decision holds past `t_f`.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.p_ss;
        }
        let i = (t / self.interval).floor() as usize;
        self.values[i.min(self.intervals - 1)]
    }

    /// Start of interval `i` (0-based).
    pub fn interval_start(&self, i: usize) -> f64 {
        i as f64 * self.interval
    }

    /// Midpoints of all intervals.
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.intervals)
            .map(|i| (i as f64 + 0.5) * self.interval)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let policy: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("policy JSON: {e}")))?;
        policy.validate()?;
        Ok(policy)
    }
}

/// Starting profile for a search on a fresh grid.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum InitialProfile {
    /// Every decision equal to `p_ss`.
    #[default]
    Constant,
    /// `value` on every interval starting before `duration`, `p_ss` afterwards.
    Pulse { value: f64, duration: f64 },
}

impl InitialProfile {
    pub fn build(&self, mechanism: Mechanism, interval: f64, intervals: usize, p_ss: f64) -> Result<Policy> {
        match *self {
            InitialProfile::Constant => Policy::constant(mechanism, interval, intervals, p_ss),
            InitialProfile::Pulse { value, duration } => {
                if !(value.is_finite() && duration.is_finite()) {
                    return Err(Error::InvalidArgument("pulse value and duration must be finite".into()));
                }
                let values = (0..intervals)
                    .map(|i| if (i as f64) * interval < duration { value } else { p_ss })
                    .collect();
                Policy::new(mechanism, interval, p_ss, values)
            }
        }
    }
}
