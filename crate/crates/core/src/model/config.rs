use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the combiner weights `w1`, `w2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CombinerShape {
    #[default]
    Scalar,
    PerStep,
}

/// Layer sizes of the main network, ancillary network and combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub main_features: usize,
    pub ancillary_features: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    /// Hidden widths of the main feed-forward stack (output layer excluded).
    pub main_hidden: Vec<usize>,
    /// Hidden widths of the ancillary feed-forward stack (output layer excluded).
    pub ancillary_hidden: Vec<usize>,
    /// Optional single-layer LSTM in front of the ancillary stack.
    pub ancillary_lstm_hidden: Option<usize>,
    pub dropout: f64,
    pub combiner: CombinerShape,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lookback: 96,
            horizon: 96,
            main_features: 23,
            ancillary_features: 3,
            lstm_hidden: 64,
            lstm_layers: 2,
            main_hidden: vec![128, 128, 120, 112, 104, 96],
            ancillary_hidden: vec![32, 64, 96],
            ancillary_lstm_hidden: None,
            dropout: 0.1,
            combiner: CombinerShape::Scalar,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lookback", self.lookback),
            ("horizon", self.horizon),
            ("main_features", self.main_features),
            ("ancillary_features", self.ancillary_features),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Domain(format!("model config `{name}` must be positive")));
        }
        if self.main_hidden.iter().chain(&self.ancillary_hidden).any(|&w| w == 0) {
            return Err(Error::Domain("layer widths must be positive".into()));
        }
        if self.ancillary_lstm_hidden == Some(0) {
            return Err(Error::Domain("ancillary LSTM width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Domain(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn combiner_len(&self) -> usize {
        match self.combiner {
            CombinerShape::Scalar => 1,
            CombinerShape::PerStep => self.horizon,
        }
    }
}
