use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutMode {
    Train,
    McInference,
    Off,
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub mode: DropoutMode,
}

impl DropoutSpec {
    pub fn new(rate: f64, mode: DropoutMode) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Domain(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, mode })
    }

    pub fn off() -> Self {
        Self {
            rate: 0.0,
            mode: DropoutMode::Off,
        }
    }

    pub fn with_mode(self, mode: DropoutMode) -> Self {
        Self { mode, ..self }
    }

    pub fn is_active(&self) -> bool {
        self.mode != DropoutMode::Off && self.rate > 0.0
    }
}

/// Where dropout masks draw their randomness from.
pub enum MaskSource<'a> {
    /// One stream consumed row by row (training).
    Shared(&'a mut Rng),
    /// One independent stream per batch row (MC sampling).
    PerRow(&'a mut [Rng]),
    /// No masks are drawn.
    None,
}

impl MaskSource<'_> {
    /// Draws a `rows × cols` keep-mask with survivors set to `1 / (1 - rate)`.
    pub fn draw(&mut self, rate: f64, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let keep = 1.0 / (1.0 - rate);
        let mut mask = Vec::with_capacity(rows * cols);
        match self {
            MaskSource::Shared(rng) => {
                for _ in 0..rows * cols {
                    mask.push(if rng.random::<f64>() >= rate { keep } else { 0.0 });
                }
            }
            MaskSource::PerRow(rngs) => {
                if rngs.len() != rows {
                    return Err(Error::dim("dropout mask", &[rows, cols], &[rngs.len()]));
                }
                for rng in rngs.iter_mut() {
                    for _ in 0..cols {
                        mask.push(if rng.random::<f64>() >= rate { keep } else { 0.0 });
                    }
                }
            }
            MaskSource::None => {
                return Err(Error::Contract(
                    "active dropout requires a random mask source".into(),
                ))
            }
        }
        Ok(mask)
    }
}
