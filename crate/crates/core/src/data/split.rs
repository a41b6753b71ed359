use serde::{Deserialize, Serialize};

use crate::data::window::WindowedDataset;
use crate::error::{Error, Result};

/// Chronological train / validation / test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of timestamps used for fitting (training + validation).
    pub train_ratio: f64,
    /// Fraction of the fitting span held out at its end for validation.
    pub validation_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_ratio: 0.8,
            validation_fraction: 0.2,
        }
    }
}

/// Timestamp counts per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitCounts {
    /// Fitting span before validation is carved out.
    pub fn fit(&self) -> usize {
        self.train + self.validation
    }
}

pub fn split_counts(total: usize, spec: &SplitSpec) -> Result<SplitCounts> {
    let valid = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
    if !valid(spec.train_ratio) || !valid(spec.validation_fraction) {
        return Err(Error::Domain(format!("invalid split spec {spec:?}")));
    }
    let fit = (spec.train_ratio * total as f64).floor() as usize;
    let validation = (spec.validation_fraction * fit as f64).floor() as usize;
    Ok(SplitCounts {
        train: fit - validation,
        validation,
        test: total - fit,
    })
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub counts: SplitCounts,
    pub train: WindowedDataset,
    pub validation: WindowedDataset,
    pub test: WindowedDataset,
    /// Window starts straddling a boundary, assigned to no split.
    pub discarded: Vec<usize>,
}

/// Assigns each window to the split that contains every row it touches.
pub fn split(ds: &WindowedDataset, spec: &SplitSpec) -> Result<Splits> {
    let counts = split_counts(ds.series_len(), spec)?;
    let bounds = [
        0..counts.train,
        counts.train..counts.fit(),
        counts.fit()..ds.series_len(),
    ];
    let mut parts: [Vec<usize>; 3] = Default::default();
    let mut discarded = Vec::new();
    for i in 0..ds.len() {
        let span = ds.span(i);
        match bounds
            .iter()
            .position(|b| b.start <= span.start && span.end <= b.end)
        {
            Some(p) => parts[p].push(ds.start(i)),
            None => discarded.push(ds.start(i)),
        }
    }
    for (name, part) in ["train", "validation", "test"].iter().zip(&parts) {
        if part.is_empty() {
            return Err(Error::Domain(format!(
                "{name} split holds no complete window (counts {counts:?}, window span {})",
                ds.lookback + ds.horizon
            )));
        }
    }
    let [train, validation, test] = parts;
    Ok(Splits {
        counts,
        train: ds.subset(train),
        validation: ds.subset(validation),
        test: ds.subset(test),
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_split_sizes() {
        let c = split_counts(84_768, &SplitSpec::default()).unwrap();
        assert_eq!(c.fit(), 67_814);
        assert_eq!(c.test, 16_954);
        assert_eq!(c.validation, 13_562);
    }

    #[test]
    fn invalid_ratio() {
        let spec = SplitSpec {
            train_ratio: 1.5,
            ..SplitSpec::default()
        };
        assert!(split_counts(100, &spec).is_err());
    }
}
