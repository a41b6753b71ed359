use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::metrics::errors::{ErrorAccum, ErrorStats};
use crate::metrics::extremum::{extremum_windows, window_members};
use crate::model::Forecaster;
use crate::rng;
use crate::uncertainty::{derive_ci, CoverageCount, IntervalMode};

pub const REPORT_FORMAT: &str = "adjoint-evaluation-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Step 0 of every window, spliced into one series.
    OneStep,
    /// Every (window, step) pair.
    MultiStep,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::OneStep => "one_step",
            EvalMode::MultiStep => "multi_step",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// MC-dropout passes per test window.
    pub mc_samples: usize,
    pub seed: u64,
    /// Interval construction used for the headline non-coverage.
    pub interval_mode: IntervalMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mc_samples: 100,
            seed: 0,
            interval_mode: IntervalMode::Predictive,
        }
    }
}

/// Metrics over one calendar month or the whole test span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    /// `YYYY-MM`, or `overall`.
    pub period: String,
    pub all: ErrorStats,
    /// Errors inside the daily max/min windows; absent if the period has none.
    pub extremum: Option<ErrorStats>,
    pub non_coverage_68: f64,
    pub non_coverage_95: f64,
    /// Non-coverage of the other interval mode on the same samples.
    pub alt_non_coverage_68: f64,
    pub alt_non_coverage_95: f64,
}

/// Per-horizon-step errors and non-coverage (multi-step only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub rmse: f64,
    pub mae: f64,
    pub non_coverage_68: f64,
    pub non_coverage_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format: String,
    pub version: u32,
    pub model_tag: String,
    pub mode: EvalMode,
    /// Digest of the test windows, checked before comparing reports.
    pub split_digest: String,
    pub interval_mode: IntervalMode,
    pub alt_interval_mode: IntervalMode,
    pub mc_samples: usize,
    pub seed: u64,
    pub windows: usize,
    pub overall: PeriodMetrics,
    pub months: Vec<PeriodMetrics>,
    pub steps: Vec<StepMetrics>,
}

/// Sums for one period.
#[derive(Debug, Clone, Default)]
struct PeriodAccum {
    all: ErrorAccum,
    extremum: ErrorAccum,
    cov68: CoverageCount,
    cov95: CoverageCount,
    alt68: CoverageCount,
    alt95: CoverageCount,
}

impl PeriodAccum {
    fn merge(&mut self, o: &PeriodAccum) {
        self.all.merge(&o.all);
        self.extremum.merge(&o.extremum);
        self.cov68.merge(o.cov68);
        self.cov95.merge(o.cov95);
        self.alt68.merge(o.alt68);
        self.alt95.merge(o.alt95);
    }

    fn finish(&self, period: String) -> Result<PeriodMetrics> {
        let nc = |c: CoverageCount| c.non_coverage().unwrap_or(0.0);
        Ok(PeriodMetrics {
            period,
            all: self.all.finish()?,
            extremum: if self.extremum.count > 0 {
                Some(self.extremum.finish()?)
            } else {
                None
            },
            non_coverage_68: nc(self.cov68),
            non_coverage_95: nc(self.cov95),
            alt_non_coverage_68: nc(self.alt68),
            alt_non_coverage_95: nc(self.alt95),
        })
    }
}

/// One scored point: forecast, truth and both interval pairs.
#[derive(Debug, Clone, Copy)]
struct Scored {
    ts: NaiveDateTime,
    pred: f64,
    truth: f64,
    ci: [(f64, f64); 2],
    alt: [(f64, f64); 2],
}

fn month_key(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m").to_string()
}

fn in_band(c: &mut CoverageCount, y: f64, band: (f64, f64)) {
    c.add(y, band.0, band.1);
}

fn accumulate(acc: &mut PeriodAccum, s: &Scored, extremum: bool) {
    acc.all.add(s.pred, s.truth);
    if extremum {
        acc.extremum.add(s.pred, s.truth);
    }
    in_band(&mut acc.cov68, s.truth, s.ci[0]);
    in_band(&mut acc.cov95, s.truth, s.ci[1]);
    in_band(&mut acc.alt68, s.truth, s.alt[0]);
    in_band(&mut acc.alt95, s.truth, s.alt[1]);
}

/// Seed of the MC streams for the window starting at series row `start`.
///
/// Depends only on the root seed and the row, so different models scored on
/// the same windows share their per-window seeds.
pub fn window_seed(root: u64, start: usize) -> u64 {
    rng::derive_seed(root, "mc.window", start as u64)
}

/// Scores `model` on every test window in both modes with one pass of
/// point forecasts and MC sampling.
pub fn evaluate_both(
    model: &dyn Forecaster,
    test: &WindowedDataset,
    cfg: &EvalConfig,
    model_tag: &str,
) -> Result<(EvaluationReport, EvaluationReport)> {
    if test.is_empty() {
        return Err(Error::Domain("cannot evaluate on an empty test split".into()));
    }
    if model.horizon() != test.horizon || model.lookback() != test.lookback {
        return Err(Error::dim(
            "evaluate",
            &[model.lookback(), model.horizon()],
            &[test.lookback, test.horizon],
        ));
    }
    let h = test.horizon;
    let alt_mode = match cfg.interval_mode {
        IntervalMode::Predictive => IntervalMode::MeanCi,
        IntervalMode::MeanCi => IntervalMode::Predictive,
    };
    let idx: Vec<usize> = (0..test.len()).collect();
    let points = model.point(test, &idx)?;

    // multi-step points indexed by (window, step); one-step uses step 0
    let mut multi: Vec<Scored> = Vec::with_capacity(test.len() * h);
    for i in 0..test.len() {
        let samples = model.samples(test, i, cfg.mc_samples, window_seed(cfg.seed, test.start(i)))?;
        let point = points[i * h..(i + 1) * h].to_vec();
        let ci = derive_ci(&samples, point.clone(), cfg.interval_mode)?;
        let alt = derive_ci(&samples, point, alt_mode)?;
        let truth = test.target(i);
        let ts = test.target_timestamps(i);
        for j in 0..h {
            multi.push(Scored {
                ts: ts[j],
                pred: ci.point[j],
                truth: truth[j],
                ci: [(ci.lo68[j], ci.hi68[j]), (ci.lo95[j], ci.hi95[j])],
                alt: [(alt.lo68[j], alt.hi68[j]), (alt.lo95[j], alt.hi95[j])],
            });
        }
    }
    let one: Vec<Scored> = multi.iter().step_by(h).copied().collect();

    let digest = test.digest();
    let base = |mode| Header {
        model_tag: model_tag.to_string(),
        mode,
        digest: digest.clone(),
        cfg: cfg.clone(),
        alt_mode,
        windows: test.len(),
    };

    // one-step: the spliced series is its own truth series
    let one_ts: Vec<NaiveDateTime> = one.iter().map(|s| s.ts).collect();
    let one_truth: Vec<f64> = one.iter().map(|s| s.truth).collect();
    let one_members = window_members(&extremum_windows(&one_ts, &one_truth)?);
    let mut one_flags = vec![false; one.len()];
    one_members.iter().for_each(|&i| one_flags[i] = true);
    let one_report = build_report(base(EvalMode::OneStep), &one, &one_flags, None)?;

    // multi-step: extremum windows over the truth of every covered target row
    let first_row = test.target_row(0);
    let last_row = test.target_row(test.len() - 1) + h;
    let rows_ts = &test.timestamps()[first_row..last_row];
    let rows_truth = &test.series_targets()[first_row..last_row];
    let mut row_flags = vec![false; last_row - first_row];
    for i in window_members(&extremum_windows(rows_ts, rows_truth)?) {
        row_flags[i] = true;
    }
    let multi_flags: Vec<bool> = (0..multi.len())
        .map(|k| row_flags[test.target_row(k / h) - first_row + k % h])
        .collect();
    let multi_report = build_report(base(EvalMode::MultiStep), &multi, &multi_flags, Some(h))?;

    Ok((one_report, multi_report))
}

/// Scores a single mode.
pub fn evaluate(
    model: &dyn Forecaster,
    test: &WindowedDataset,
    mode: EvalMode,
    cfg: &EvalConfig,
    model_tag: &str,
) -> Result<EvaluationReport> {
    let (one, multi) = evaluate_both(model, test, cfg, model_tag)?;
    Ok(match mode {
        EvalMode::OneStep => one,
        EvalMode::MultiStep => multi,
    })
}

struct Header {
    model_tag: String,
    mode: EvalMode,
    digest: String,
    cfg: EvalConfig,
    alt_mode: IntervalMode,
    windows: usize,
}

fn build_report(
    header: Header,
    points: &[Scored],
    extremum: &[bool],
    horizon: Option<usize>,
) -> Result<EvaluationReport> {
    let mut months: BTreeMap<String, PeriodAccum> = BTreeMap::new();
    for (s, &e) in points.iter().zip(extremum) {
        accumulate(months.entry(month_key(&s.ts)).or_default(), s, e);
    }
    let mut overall = PeriodAccum::default();
    months.values().for_each(|m| overall.merge(m));

    let steps = match horizon {
        None => Vec::new(),
        Some(h) => (0..h)
            .map(|j| {
                let mut acc = PeriodAccum::default();
                points
                    .iter()
                    .skip(j)
                    .step_by(h)
                    .for_each(|s| accumulate(&mut acc, s, false));
                let m = acc.finish(String::new())?;
                Ok(StepMetrics {
                    step: j,
                    rmse: m.all.rmse,
                    mae: m.all.mae,
                    non_coverage_68: m.non_coverage_68,
                    non_coverage_95: m.non_coverage_95,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };

    Ok(EvaluationReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        model_tag: header.model_tag,
        mode: header.mode,
        split_digest: header.digest,
        interval_mode: header.cfg.interval_mode,
        alt_interval_mode: header.alt_mode,
        mc_samples: header.cfg.mc_samples,
        seed: header.cfg.seed,
        windows: header.windows,
        overall: overall.finish("overall".into())?,
        months: months
            .into_iter()
            .map(|(k, acc)| acc.finish(k))
            .collect::<Result<Vec<_>>>()?,
        steps,
    })
}
