use crate::data::{Normalizer, WindowedDataset};
use crate::error::{Error, Result};
use crate::model::adjoint::{AdjointModel, Variant};
use crate::model::batch::Batch;
use crate::model::checkpoint::{Checkpoint, CheckpointModel};
use crate::uncertainty::{mc_sample_batch, SampleSet};

/// Anything that turns dataset windows into °F forecasts and MC samples.
pub trait Forecaster {
    fn lookback(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Dropout-off forecasts for windows `idx`, `[idx.len() × H]` row-major.
    fn point(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<f64>>;
    /// `n` stochastic forecasts of window `i`.
    fn samples(&self, ds: &WindowedDataset, i: usize, n: usize, seed: u64) -> Result<SampleSet>;
}

/// A trained network with the normalizer fitted on its training data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: AdjointModel,
    pub normalizer: Normalizer,
    pub variant: Variant,
}

impl TrainedModel {
    pub fn new(model: AdjointModel, normalizer: Normalizer, variant: Variant) -> Self {
        Self {
            model,
            normalizer,
            variant,
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    fn check(&self, ds: &WindowedDataset) -> Result<()> {
        let c = &self.model.config;
        if ds.lookback != c.lookback || ds.horizon != c.horizon || ds.n_features() != c.main_features {
            return Err(Error::dim(
                "forecast",
                &[c.lookback, c.horizon, c.main_features],
                &[ds.lookback, ds.horizon, ds.n_features()],
            ));
        }
        Ok(())
    }
}

impl Forecaster for TrainedModel {
    fn lookback(&self) -> usize {
        self.model.config.lookback
    }

    fn horizon(&self) -> usize {
        self.model.config.horizon
    }

    fn point(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<f64>> {
        self.check(ds)?;
        let mut out = Vec::with_capacity(idx.len() * self.horizon());
        for chunk in idx.chunks(256) {
            let batch = Batch::from_dataset(ds, chunk, &self.normalizer, self.model.uses_ancillary_lstm())?;
            let scaled = self.model.predict_batch(&batch, self.variant)?;
            out.extend(scaled.into_iter().map(|s| self.normalizer.target.unscale(s)));
        }
        Ok(out)
    }

    fn samples(&self, ds: &WindowedDataset, i: usize, n: usize, seed: u64) -> Result<SampleSet> {
        self.check(ds)?;
        let batch = Batch::from_dataset(ds, &[i], &self.normalizer, self.model.uses_ancillary_lstm())?;
        let set = mc_sample_batch(&self.model, &batch, self.variant, n, seed)?;
        let target = self.normalizer.target;
        Ok(set.map(|s| target.unscale(s)))
    }
}

/// Returns the ground truth as its forecast; samples straddle it by ±0.5 °F.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleForecaster {
    pub lookback: usize,
    pub horizon: usize,
}

impl Forecaster for OracleForecaster {
    fn lookback(&self) -> usize {
        self.lookback
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn point(&self, ds: &WindowedDataset, idx: &[usize]) -> Result<Vec<f64>> {
        if ds.horizon != self.horizon {
            return Err(Error::dim("oracle", &[self.horizon], &[ds.horizon]));
        }
        Ok(idx.iter().flat_map(|&i| ds.target(i).iter().copied()).collect())
    }

    fn samples(&self, ds: &WindowedDataset, i: usize, n: usize, seed: u64) -> Result<SampleSet> {
        let truth = self.point(ds, &[i])?;
        let samples = (0..n)
            .flat_map(|s| {
                let d = if s % 2 == 0 { 0.5 } else { -0.5 };
                truth.iter().map(move |t| t + d)
            })
            .collect();
        SampleSet::new(samples, n, self.horizon, seed)
    }
}

/// Builds the forecaster stored in a checkpoint.
pub fn load_forecaster(ckpt: &Checkpoint, variant: Variant) -> Result<Box<dyn Forecaster>> {
    Ok(match &ckpt.model {
        CheckpointModel::Adjoint {
            model,
            normalizer,
            params,
            ..
        } => {
            let m = AdjointModel::from_records(model.clone(), params)?;
            Box::new(TrainedModel::new(m, normalizer.clone(), variant))
        }
        CheckpointModel::Oracle { lookback, horizon } => Box::new(OracleForecaster {
            lookback: *lookback,
            horizon: *horizon,
        }),
    })
}
