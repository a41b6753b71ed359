//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use adjoint_core::data::{read_holidays, us_federal_holidays, Holiday, SplitSpec, SynthConfig};
use adjoint_core::model::{ModelConfig, TrainingConfig};
use adjoint_core::uncertainty::IntervalMode;
use anyhow::Context;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed of every random stream in the command.
    pub seed: u64,
    pub synth: SynthSection,
    pub data: DataSection,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub start: NaiveDate,
    pub days: usize,
    pub noise_sigma: f64,
    /// `YYYY-MM-DD,major|minor` lines.
    pub holidays_file: Option<PathBuf>,
    /// Add the US federal calendar over the generated span.
    pub federal_holidays: bool,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            start: d.start,
            days: d.days,
            noise_sigma: d.noise_sigma,
            holidays_file: None,
            federal_holidays: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub lookback: usize,
    pub horizon: usize,
    pub train_ratio: f64,
    pub validation_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            lookback: 96,
            horizon: 96,
            train_ratio: s.train_ratio,
            validation_fraction: s.validation_fraction,
        }
    }
}

impl DataSection {
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_ratio: self.train_ratio,
            validation_fraction: self.validation_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// MC-dropout passes per test window.
    pub mc_samples: usize,
    /// MC-dropout passes for a single forecast.
    pub forecast_samples: usize,
    pub interval_mode: IntervalMode,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            mc_samples: 100,
            forecast_samples: adjoint_core::uncertainty::DEFAULT_SAMPLES,
            interval_mode: IntervalMode::Predictive,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with the file at `path`, if any.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| adjoint_core::Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Holidays from the configured file and/or the federal calendar over `[start, start + days)`.
    pub fn holidays(&self, start: NaiveDate, days: usize) -> anyhow::Result<Vec<Holiday>> {
        let mut out = Vec::new();
        if let Some(path) = &self.synth.holidays_file {
            out.extend(read_holidays(path).with_context(|| format!("reading holidays {}", path.display()))?);
        }
        if self.synth.federal_holidays {
            out.extend(us_federal_holidays(start, days));
        }
        out.sort_by_key(|h| h.date);
        out.dedup_by_key(|h| h.date);
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }
}

/// A config file or flag combination that cannot be used.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}
