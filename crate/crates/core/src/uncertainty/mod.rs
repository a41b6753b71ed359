//! MC-dropout sample sets, Gaussian confidence intervals and non-coverage.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::model::{AdjointModel, Batch, Variant};
use crate::nn::Tensor;
use crate::rng::{self, Rng};

pub const DEFAULT_SAMPLES: usize = 10_000;

/// Samples per forward graph; rows draw from their own streams, so chunking
/// does not change results.
const CHUNK: usize = 1024;

/// `n_samples × H` forecasts, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub n_samples: usize,
    pub horizon: usize,
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl SampleSet {
    pub fn new(samples: Vec<f64>, n_samples: usize, horizon: usize, seed: u64) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 samples for a variance, got {n_samples}"
            )));
        }
        if horizon == 0 || samples.len() != n_samples * horizon {
            return Err(Error::dim("sample set", &[n_samples, horizon], &[samples.len()]));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample set contains non-finite values".into()));
        }
        Ok(Self {
            n_samples,
            horizon,
            samples,
            seed,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.horizon..(i + 1) * self.horizon]
    }

    /// Applies `f` to every sample value.
    pub fn map(mut self, f: impl Fn(f64) -> f64) -> Self {
        self.samples.iter_mut().for_each(|v| *v = f(*v));
        self
    }

    /// Per-step mean and sample standard deviation (n − 1 denominator).
    ///
    /// Each column is sorted before summation, so the result does not depend
    /// on row order.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_samples;
        let mut col = vec![0.0; n];
        let mut mean = Vec::with_capacity(self.horizon);
        let mut std = Vec::with_capacity(self.horizon);
        for j in 0..self.horizon {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.samples[i * self.horizon + j];
            }
            col.sort_by(f64::total_cmp);
            if col[0] == col[n - 1] {
                mean.push(col[0]);
                std.push(0.0);
                continue;
            }
            let mu = col.iter().sum::<f64>() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mu) * (v - mu)).sum();
            mean.push(mu);
            std.push((ss / (n - 1) as f64).sqrt());
        }
        (mean, std)
    }
}

/// Independent mask streams for samples `first..first + count`.
fn sample_streams(seed: u64, first: usize, count: usize) -> Vec<Rng> {
    (first..first + count)
        .map(|s| rng::stream(seed, "mc", s as u64))
        .collect()
}

/// `n` MC-dropout forward passes over one single-window batch, in model space.
///
/// Sample `s` draws every mask from stream `(seed, "mc", s)`.
pub fn mc_sample_batch(
    model: &AdjointModel,
    window: &Batch,
    variant: Variant,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 samples for a variance, got {n}"
        )));
    }
    let mut samples = Vec::with_capacity(n * model.config.horizon);
    let mut first = 0;
    while first < n {
        let count = CHUNK.min(n - first);
        let mut rngs = sample_streams(seed, first, count);
        samples.extend(model.sample_window(window, variant, &mut rngs)?);
        first += count;
    }
    SampleSet::new(samples, n, model.config.horizon, seed)
}

/// MC-dropout samples of the combined forecast for a normalized `[L × m]`
/// window and its `[L × k]` indicator window.
pub fn mc_sample(
    model: &AdjointModel,
    window: &Tensor,
    anc_window: &Tensor,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    let c = &model.config;
    if window.shape() != [c.lookback, c.main_features] {
        return Err(Error::dim("mc_sample", &[c.lookback, c.main_features], window.shape()));
    }
    if anc_window.shape() != [c.lookback, c.ancillary_features] {
        return Err(Error::dim(
            "mc_sample",
            &[c.lookback, c.ancillary_features],
            anc_window.shape(),
        ));
    }
    crate::model::validate_indicators(anc_window.data())?;
    let batch = Batch::from_slices(
        &[window.data()],
        &[anc_window.data()],
        c.lookback,
        c.main_features,
        c.ancillary_features,
        model.uses_ancillary_lstm(),
    )?;
    mc_sample_batch(model, &batch, Variant::Adjoint, n, seed)
}

/// How a CI is built from sample moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMode {
    /// Interval for the sample mean: `μ ± t(1−α/2, n−1) · σ / √n`.
    MeanCi,
    /// Band for a single outcome: `μ ± z(1−α/2) · σ`.
    #[default]
    Predictive,
}

/// Multiplier `q` such that the interval is `μ ± q · σ`.
pub fn half_width_factor(alpha: f64, n: usize, mode: IntervalMode) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 samples for a variance, got {n}"
        )));
    }
    let p = 1.0 - alpha / 2.0;
    Ok(match mode {
        IntervalMode::Predictive => normal_quantile(p),
        IntervalMode::MeanCi => student_t_quantile(p, (n - 1) as f64)? / (n as f64).sqrt(),
    })
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn student_t_quantile(p: f64, dof: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Domain(format!("t distribution with {dof} dof: {e}")))?;
    Ok(dist.inverse_cdf(p))
}

/// Point forecast plus per-step 68% and 95% intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastWithCI {
    /// Dropout-off prediction.
    pub point: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub lo68: Vec<f64>,
    pub hi68: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
    pub mode: IntervalMode,
    /// Set when some step has zero spread, leaving a zero-width interval.
    pub degenerate: bool,
}

impl ForecastWithCI {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }
}

/// The interval `μ ± q · σ` per step for a single level.
pub fn interval(samples: &SampleSet, alpha: f64, mode: IntervalMode) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = half_width_factor(alpha, samples.n_samples, mode)?;
    let (mean, std) = samples.moments();
    Ok(mean
        .iter()
        .zip(&std)
        .map(|(m, s)| (m - q * s, m + q * s))
        .unzip())
}

/// Builds 68% and 95% intervals around the sample moments.
pub fn derive_ci(samples: &SampleSet, point: Vec<f64>, mode: IntervalMode) -> Result<ForecastWithCI> {
    if point.len() != samples.horizon {
        return Err(Error::dim("derive_ci", &[samples.horizon], &[point.len()]));
    }
    let q68 = half_width_factor(0.32, samples.n_samples, mode)?;
    let q95 = half_width_factor(0.05, samples.n_samples, mode)?;
    let (mean, std) = samples.moments();
    let band = |q: f64| -> (Vec<f64>, Vec<f64>) {
        mean.iter().zip(&std).map(|(m, s)| (m - q * s, m + q * s)).unzip()
    };
    let (lo68, hi68) = band(q68);
    let (lo95, hi95) = band(q95);
    let degenerate = std.contains(&0.0);
    Ok(ForecastWithCI {
        point,
        mean,
        std,
        lo68,
        hi68,
        lo95,
        hi95,
        mode,
        degenerate,
    })
}

/// Running count of truths strictly outside an interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageCount {
    pub outside: usize,
    pub total: usize,
}

impl CoverageCount {
    pub fn add(&mut self, truth: f64, lo: f64, hi: f64) {
        self.total += 1;
        if truth < lo || truth > hi {
            self.outside += 1;
        }
    }

    pub fn merge(&mut self, other: CoverageCount) {
        self.outside += other.outside;
        self.total += other.total;
    }

    /// Fraction outside; `None` when nothing was counted.
    pub fn non_coverage(&self) -> Option<f64> {
        (self.total > 0).then(|| self.outside as f64 / self.total as f64)
    }
}

/// Level of a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    L68,
    L95,
}

/// Fraction of `(window, step)` pairs whose truth lies strictly outside the interval.
pub fn coverage(truth: &[Vec<f64>], cis: &[ForecastWithCI], level: Level) -> Result<f64> {
    if truth.len() != cis.len() {
        return Err(Error::dim("coverage", &[cis.len()], &[truth.len()]));
    }
    let mut count = CoverageCount::default();
    for (t, ci) in truth.iter().zip(cis) {
        if t.len() != ci.horizon() {
            return Err(Error::dim("coverage", &[ci.horizon()], &[t.len()]));
        }
        let (lo, hi) = match level {
            Level::L68 => (&ci.lo68, &ci.hi68),
            Level::L95 => (&ci.lo95, &ci.hi95),
        };
        for ((&y, &l), &h) in t.iter().zip(lo).zip(hi) {
            count.add(y, l, h);
        }
    }
    count
        .non_coverage()
        .ok_or_else(|| Error::Domain("coverage over an empty set".into()))
}
