use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RMSE, MAE and MAPE over a set of (prediction, truth) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub rmse: f64,
    pub mae: f64,
    /// Percent; zero-truth entries are left out.
    pub mape: f64,
    pub count: usize,
    /// Entries left out of MAPE because their truth is zero.
    pub mape_excluded: usize,
}

/// Streaming sums behind [`ErrorStats`]; adding in a fixed order gives
/// bit-identical results.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorAccum {
    pub count: usize,
    pub sse: f64,
    pub sae: f64,
    pub sape: f64,
    pub mape_count: usize,
}

impl ErrorAccum {
    pub fn add(&mut self, pred: f64, truth: f64) {
        let e = pred - truth;
        self.count += 1;
        self.sse += e * e;
        self.sae += e.abs();
        if truth != 0.0 {
            self.sape += (e / truth).abs();
            self.mape_count += 1;
        }
    }

    pub fn merge(&mut self, other: &ErrorAccum) {
        self.count += other.count;
        self.sse += other.sse;
        self.sae += other.sae;
        self.sape += other.sape;
        self.mape_count += other.mape_count;
    }

    pub fn mse(&self) -> f64 {
        self.sse / self.count as f64
    }

    pub fn finish(&self) -> Result<ErrorStats> {
        if self.count == 0 {
            return Err(Error::Domain("error metrics over an empty set".into()));
        }
        if self.mape_count == 0 {
            return Err(Error::Domain(
                "MAPE undefined: every truth value is zero".into(),
            ));
        }
        let n = self.count as f64;
        Ok(ErrorStats {
            rmse: (self.sse / n).sqrt(),
            mae: self.sae / n,
            mape: 100.0 * self.sape / self.mape_count as f64,
            count: self.count,
            mape_excluded: self.count - self.mape_count,
        })
    }
}

/// Errors over all aligned pairs.
pub fn error_all(pred: &[f64], truth: &[f64]) -> Result<ErrorStats> {
    if pred.len() != truth.len() {
        return Err(Error::dim("error_all", &[truth.len()], &[pred.len()]));
    }
    let mut acc = ErrorAccum::default();
    pred.iter().zip(truth).for_each(|(&p, &t)| acc.add(p, t));
    acc.finish()
}
