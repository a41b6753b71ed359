use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Normalizer;
use crate::error::{Error, Result};
use crate::model::adjoint::AdjointModel;
use crate::model::config::ModelConfig;

pub const CHECKPOINT_FORMAT: &str = "adjoint-forecaster-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One parameter tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointModel {
    Adjoint {
        model: ModelConfig,
        normalizer: Normalizer,
        feature_names: Vec<String>,
        ancillary_names: Vec<String>,
        params: Vec<ParamRecord>,
    },
    /// Test stub that forecasts the ground truth.
    Oracle { lookback: usize, horizon: usize },
}

/// Self-describing saved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    /// Effective run configuration, echoed verbatim.
    pub config: serde_json::Value,
    pub model: CheckpointModel,
}

impl Checkpoint {
    pub fn adjoint(
        model: &AdjointModel,
        normalizer: &Normalizer,
        feature_names: Vec<String>,
        ancillary_names: Vec<String>,
        seed: u64,
        config: serde_json::Value,
    ) -> Self {
        let params = model
            .store
            .iter()
            .map(|p| ParamRecord {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                data: p.tensor.data().to_vec(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed,
            config,
            model: CheckpointModel::Adjoint {
                model: model.config.clone(),
                normalizer: normalizer.clone(),
                feature_names,
                ancillary_names,
                params,
            },
        }
    }

    pub fn oracle(lookback: usize, horizon: usize) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: 0,
            config: serde_json::Value::Null,
            model: CheckpointModel::Oracle { lookback, horizon },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Validation(format!(
                "not a checkpoint: format is {format:?}, expected {CHECKPOINT_FORMAT:?}"
            )));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(CHECKPOINT_VERSION)) {
            return Err(Error::Validation(format!(
                "unsupported checkpoint version {version:?}, expected {CHECKPOINT_VERSION}"
            )));
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl AdjointModel {
    /// Rebuilds a model from saved parameter records; names and shapes must
    /// match the layout implied by `config`.
    pub fn from_records(config: ModelConfig, records: &[ParamRecord]) -> Result<Self> {
        let mut model = AdjointModel::new(config, 0)?;
        if records.len() != model.store.len() {
            return Err(Error::Validation(format!(
                "checkpoint has {} parameters, model layout needs {}",
                records.len(),
                model.store.len()
            )));
        }
        for r in records {
            let id = model
                .store
                .find(&r.name)
                .ok_or_else(|| Error::Validation(format!("unknown parameter `{}`", r.name)))?;
            let p = model.store.get_mut(id);
            if p.tensor.shape() != r.shape.as_slice() || r.data.len() != p.tensor.len() {
                return Err(Error::Validation(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    r.name,
                    r.shape,
                    p.tensor.shape()
                )));
            }
            if r.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("parameter `{}` is not finite", r.name)));
            }
            p.tensor.data_mut().copy_from_slice(&r.data);
        }
        Ok(model)
    }
}
