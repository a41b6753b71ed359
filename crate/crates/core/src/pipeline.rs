//! End-to-end helpers shared by the command line and the test suites.

use chrono::NaiveDateTime;

use crate::data::series::step;
use crate::data::{feature_rows, split, window, Normalizer, RawSeries, SplitSpec, Splits};
use crate::error::{Error, Result};
use crate::model::{train, AdjointModel, Batch, ModelConfig, TrainedModel, TrainingConfig, TrainingReport, Variant};
use crate::uncertainty::{derive_ci, mc_sample_batch, ForecastWithCI, IntervalMode};

/// Windowed, split data with the normalizer fitted on the training split.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub splits: Splits,
    pub normalizer: Normalizer,
}

pub fn prepare(series: &RawSeries, lookback: usize, horizon: usize, spec: &SplitSpec) -> Result<Prepared> {
    let ds = window(series, lookback, horizon)?;
    let splits = split(&ds, spec)?;
    let normalizer = Normalizer::fit(&splits.train)?;
    Ok(Prepared { splits, normalizer })
}

/// Model config matching the data's feature counts.
pub fn fit_config(mut config: ModelConfig, data: &Prepared) -> ModelConfig {
    config.lookback = data.splits.train.lookback;
    config.horizon = data.splits.train.horizon;
    config.main_features = data.splits.train.n_features();
    config.ancillary_features = data.splits.train.n_ancillary();
    config
}

/// Initializes from `training.seed` and runs the three training stages.
pub fn fit(data: &Prepared, config: ModelConfig, training: &TrainingConfig) -> Result<(TrainedModel, TrainingReport)> {
    let mut model = AdjointModel::new(fit_config(config, data), training.seed)?;
    let report = train(
        &mut model,
        &data.splits.train,
        &data.splits.validation,
        &data.normalizer,
        training,
    )?;
    Ok((
        TrainedModel::new(model, data.normalizer.clone(), Variant::Adjoint),
        report,
    ))
}

/// Forecast of the `H` steps that follow the last row of `history`.
#[derive(Debug, Clone, PartialEq)]
pub struct NextForecast {
    pub timestamps: Vec<NaiveDateTime>,
    pub ci: ForecastWithCI,
}

/// Forecasts past the end of `history` from its last `L` rows.
///
/// `future_indicators` holds the `[H × k]` calendar flags of the forecast
/// steps; the indicator window is completed from them where it runs past
/// the data.
pub fn forecast_next(
    model: &TrainedModel,
    history: &RawSeries,
    future_indicators: &[f64],
    n_samples: usize,
    seed: u64,
    mode: IntervalMode,
) -> Result<NextForecast> {
    let c = &model.model.config;
    let (l, h, k) = (c.lookback, c.horizon, c.ancillary_features);
    let t = history.len();
    if t < l {
        return Err(Error::InsufficientHistory { needed: l, got: t });
    }
    if future_indicators.len() != h * k || history.schema.ancillary.len() != k {
        return Err(Error::Dimension {
            op: "forecast_next",
            left: vec![h, k],
            right: vec![future_indicators.len() / k.max(1), history.schema.ancillary.len()],
        });
    }
    crate::model::validate_indicators(future_indicators)?;

    let rows = feature_rows(history);
    let m = rows.len() / t;
    if m != c.main_features {
        return Err(Error::Dimension {
            op: "forecast_next",
            left: vec![c.main_features],
            right: vec![m],
        });
    }
    let mut main = rows[(t - l) * m..].to_vec();
    for row in main.chunks_mut(m) {
        model.normalizer.transform_row(row);
    }
    let mut flags: Vec<f64> = history.ancillary.clone();
    flags.extend_from_slice(future_indicators);
    let anc = &flags[(t - l + h) * k..(t + h) * k];

    let batch = Batch::from_slices(&[&main], &[anc], l, m, k, model.model.uses_ancillary_lstm())?;
    let target = model.normalizer.target;
    let point: Vec<f64> = model
        .model
        .predict_batch(&batch, model.variant)?
        .into_iter()
        .map(|s| target.unscale(s))
        .collect();
    let samples = mc_sample_batch(&model.model, &batch, model.variant, n_samples, seed)?.map(|s| target.unscale(s));
    let last = history.timestamps[t - 1];
    Ok(NextForecast {
        timestamps: (1..=h as i32).map(|j| last + step() * j).collect(),
        ci: derive_ci(&samples, point, mode)?,
    })
}
