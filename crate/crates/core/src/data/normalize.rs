use serde::{Deserialize, Serialize};

use crate::data::window::WindowedDataset;
use crate::error::{Error, Result};

/// Affine map of °F targets into a non-negative training range.
///
/// `scaled = (y - offset) / scale`. Fitted as min-max over the training rows
/// with a 10% margin on each side, so the training targets land in
/// `[1/12, 11/12]` and the combiner's ReLU never clips them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub offset: f64,
    pub scale: f64,
}

impl TargetScaler {
    pub fn identity() -> Self {
        Self {
            offset: 0.0,
            scale: 1.0,
        }
    }

    pub fn fit(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = if hi > lo { hi - lo } else { 1.0 };
        Self {
            offset: lo - 0.1 * range,
            scale: 1.2 * range,
        }
    }

    pub fn scale(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    pub fn unscale(&self, s: f64) -> f64 {
        s * self.scale + self.offset
    }
}

/// Per-feature z-score plus the target scaler, fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub target: TargetScaler,
}

impl Normalizer {
    /// Fits on the rows spanned by `train` windows.
    pub fn fit(train: &WindowedDataset) -> Result<Self> {
        let (Some(&first), Some(&last)) = (train.starts().first(), train.starts().last()) else {
            return Err(Error::Domain("cannot fit a normalizer on an empty split".into()));
        };
        let rows = first..last + train.lookback + train.horizon;
        let m = train.n_features();
        let x = train.feature_matrix();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; m];
        for r in rows.clone() {
            mean.iter_mut().zip(&x[r * m..(r + 1) * m]).for_each(|(a, v)| *a += v);
        }
        mean.iter_mut().for_each(|a| *a /= n);
        let mut var = vec![0.0; m];
        for r in rows.clone() {
            for (j, v) in x[r * m..(r + 1) * m].iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let target = TargetScaler::fit(&train.series_targets()[rows]);
        Ok(Self { mean, std, target })
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    /// Returns `ds` over a normalized copy of its feature matrix.
    pub fn apply(&self, ds: &WindowedDataset) -> Result<WindowedDataset> {
        let m = ds.n_features();
        if m != self.mean.len() {
            return Err(Error::dim("normalize", &[self.mean.len()], &[m]));
        }
        let mut x = ds.feature_matrix().to_vec();
        x.chunks_mut(m).for_each(|row| self.transform_row(row));
        ds.with_features(x)
    }
}
