use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling interval of every series.
pub const STEP_MINUTES: i64 = 15;
/// Samples per calendar day.
pub const STEPS_PER_DAY: usize = 96;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn step() -> TimeDelta {
    TimeDelta::minutes(STEP_MINUTES)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    Reject,
    ForwardFill,
}

/// Column layout of an input table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub timestamp: String,
    pub target: String,
    pub main: Vec<String>,
    pub ancillary: Vec<String>,
    pub target_bounds: (f64, f64),
    pub gap_policy: GapPolicy,
}

pub const MAIN_COLUMNS: [&str; 13] = [
    "outdoor_temp",
    "humidity",
    "dew_point",
    "wind_speed",
    "wind_dir",
    "pressure",
    "fog",
    "rain",
    "snow",
    "hail",
    "thunder",
    "tornado",
    "occupancy",
];

pub const ANCILLARY_COLUMNS: [&str; 3] = ["is_weekend", "is_major_holiday", "is_minor_holiday"];

impl Default for Schema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            target: "indoor_temp".into(),
            main: MAIN_COLUMNS.iter().map(|s| s.to_string()).collect(),
            ancillary: ANCILLARY_COLUMNS.iter().map(|s| s.to_string()).collect(),
            target_bounds: (40.0, 100.0),
            gap_policy: GapPolicy::Reject,
        }
    }
}

impl Schema {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec![self.timestamp.clone(), self.target.clone()];
        h.extend(self.main.iter().cloned());
        h.extend(self.ancillary.iter().cloned());
        h
    }
}

/// A validated, uniformly sampled building time series.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub schema: Schema,
    pub timestamps: Vec<NaiveDateTime>,
    /// `[T × schema.main.len()]`, row-major.
    pub main: Vec<f64>,
    /// `[T × schema.ancillary.len()]`, entries in `{0, 1}`.
    pub ancillary: Vec<f64>,
    /// Indoor temperature in °F.
    pub target: Vec<f64>,
    /// Row indices inserted by forward-fill imputation.
    pub imputed: Vec<usize>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn main_row(&self, i: usize) -> &[f64] {
        let m = self.schema.main.len();
        &self.main[i * m..(i + 1) * m]
    }

    pub fn ancillary_row(&self, i: usize) -> &[f64] {
        let k = self.schema.ancillary.len();
        &self.ancillary[i * k..(i + 1) * k]
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let t = self.timestamps.len();
        let (m, k) = (self.schema.main.len(), self.schema.ancillary.len());
        if self.main.len() != t * m || self.ancillary.len() != t * k || self.target.len() != t {
            return Err(Error::dim("raw_series", &[t, m, k], &[self.main.len(), self.ancillary.len()]));
        }
        for (i, w) in self.timestamps.windows(2).enumerate() {
            if w[1] - w[0] != step() {
                return Err(Error::Format {
                    row: i + 2,
                    message: format!("non-uniform spacing between {} and {}", w[0], w[1]),
                });
            }
        }
        if let Some(i) = self.ancillary.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Validation(format!(
                "ancillary column `{}` at row {} is {} (expected 0 or 1)",
                self.schema.ancillary[i % k],
                i / k + 1,
                self.ancillary[i]
            )));
        }
        let (lo, hi) = self.schema.target_bounds;
        if let Some(i) = self.target.iter().position(|&v| !v.is_finite() || v < lo || v > hi) {
            return Err(Error::Validation(format!(
                "target {} at row {} outside [{lo}, {hi}]",
                self.target[i],
                i + 1
            )));
        }
        if let Some(i) = self.main.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite main feature at row {}", i / m + 1)));
        }
        Ok(())
    }
}
