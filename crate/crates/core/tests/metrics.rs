use adjoint_core::data::{generate_synthetic, split, window, SplitSpec, SynthConfig, WindowedDataset};
use adjoint_core::metrics::{
    compare, error_all, evaluate_both, EvalConfig, EvalMode, ErrorAccum, EvaluationReport,
};
use adjoint_core::model::{Forecaster, OracleForecaster};
use adjoint_core::rng;
use adjoint_core::uncertainty::SampleSet;
use adjoint_core::Error;
use rand::Rng as _;

fn test_split(days: usize) -> WindowedDataset {
    let series = generate_synthetic(&SynthConfig {
        days,
        seed: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let ds = window(&series, 16, 8).unwrap();
    split(&ds, &SplitSpec::default()).unwrap().test
}

/// Truth shifted by a constant, with a symmetric two-point spread.
struct Shifted(f64);

impl Forecaster for Shifted {
    fn lookback(&self) -> usize {
        16
    }

    fn horizon(&self) -> usize {
        8
    }

    fn point(&self, ds: &WindowedDataset, idx: &[usize]) -> adjoint_core::Result<Vec<f64>> {
        Ok(idx.iter().flat_map(|&i| ds.target(i).iter().map(|t| t + self.0)).collect())
    }

    fn samples(&self, ds: &WindowedDataset, i: usize, n: usize, seed: u64) -> adjoint_core::Result<SampleSet> {
        let p = self.point(ds, &[i])?;
        let v = (0..n)
            .flat_map(|s| {
                let d = if s % 2 == 0 { 0.1 } else { -0.1 };
                p.iter().map(move |x| x + d)
            })
            .collect();
        SampleSet::new(v, n, 8, seed)
    }
}

fn brute(pred: &[f64], truth: &[f64]) -> (f64, f64, f64) {
    let n = pred.len() as f64;
    let mut se = Vec::new();
    let mut ae = Vec::new();
    let mut ape = Vec::new();
    for (p, t) in pred.iter().zip(truth) {
        se.push((p - t) * (p - t));
        ae.push((p - t).abs());
        ape.push(((p - t) / t).abs() * 100.0);
    }
    (
        (se.iter().sum::<f64>() / n).sqrt(),
        ae.iter().sum::<f64>() / n,
        ape.iter().sum::<f64>() / n,
    )
}

#[test]
fn streamed_chunks_match_brute_force() {
    let mut r = rng::stream(1, "test.metrics", 0);
    for trial in 0..50 {
        let n = r.random_range(1..500);
        let truth: Vec<f64> = (0..n).map(|_| r.random_range(60.0..80.0)).collect();
        let pred: Vec<f64> = truth.iter().map(|t| t + r.random_range(-3.0..3.0)).collect();
        let (rmse, mae, mape) = brute(&pred, &truth);
        let mut total = ErrorAccum::default();
        for chunk in (0..n).collect::<Vec<_>>().chunks(r.random_range(1..64)) {
            let mut part = ErrorAccum::default();
            chunk.iter().for_each(|&i| part.add(pred[i], truth[i]));
            total.merge(&part);
        }
        let s = total.finish().unwrap();
        assert!((s.rmse - rmse).abs() < 1e-10, "trial {trial}");
        assert!((s.mae - mae).abs() < 1e-10, "trial {trial}");
        assert!((s.mape - mape).abs() < 1e-10, "trial {trial}");
        assert_eq!(s.count, n);
    }
}

#[test]
fn oracle_scores_perfectly_in_both_modes() {
    let test = test_split(40);
    let oracle = OracleForecaster { lookback: 16, horizon: 8 };
    let cfg = EvalConfig {
        mc_samples: 20,
        ..EvalConfig::default()
    };
    let (one, multi) = evaluate_both(&oracle, &test, &cfg, "oracle").unwrap();
    for r in [&one, &multi] {
        assert_eq!((r.overall.all.rmse, r.overall.all.mae, r.overall.all.mape), (0.0, 0.0, 0.0));
        assert_eq!(r.overall.extremum.unwrap().rmse, 0.0);
        assert_eq!(r.overall.non_coverage_68, 0.0);
        assert_eq!(r.overall.non_coverage_95, 0.0);
    }
    assert_eq!(one.mode, EvalMode::OneStep);
    assert_eq!(one.overall.all.count, test.len());
    assert_eq!(multi.overall.all.count, test.len() * 8);
    assert_eq!(multi.steps.len(), 8);
    assert!(one.steps.is_empty());
}

#[test]
fn monthly_errors_pool_into_overall() {
    let test = test_split(100);
    let cfg = EvalConfig {
        mc_samples: 4,
        ..EvalConfig::default()
    };
    let (one, multi) = evaluate_both(&Shifted(0.7), &test, &cfg, "shifted").unwrap();
    for r in [&one, &multi] {
        assert!(r.months.len() >= 2);
        let count: usize = r.months.iter().map(|m| m.all.count).sum();
        let pooled = r
            .months
            .iter()
            .map(|m| m.all.count as f64 * m.all.rmse.powi(2))
            .sum::<f64>()
            / count as f64;
        assert_eq!(count, r.overall.all.count);
        assert!((pooled - r.overall.all.rmse.powi(2)).abs() < 1e-10);
        assert!((r.overall.all.rmse - 0.7).abs() < 1e-10);
        // a ±0.1 spread never reaches a 0.7 offset
        assert_eq!(r.overall.non_coverage_95, 1.0);
    }
}

#[test]
fn one_step_series_matches_direct_scoring() {
    let test = test_split(40);
    let (one, _) = evaluate_both(&Shifted(-0.4), &test, &EvalConfig { mc_samples: 4, ..EvalConfig::default() }, "s").unwrap();
    let truth: Vec<f64> = (0..test.len()).map(|i| test.target(i)[0]).collect();
    let pred: Vec<f64> = truth.iter().map(|t| t - 0.4).collect();
    let direct = error_all(&pred, &truth).unwrap();
    assert!((one.overall.all.rmse - direct.rmse).abs() < 1e-10);
    assert!((one.overall.all.mape - direct.mape).abs() < 1e-10);
}

fn reports(test: &WindowedDataset) -> (EvaluationReport, EvaluationReport) {
    let cfg = EvalConfig {
        mc_samples: 4,
        ..EvalConfig::default()
    };
    let (good, _) = evaluate_both(&Shifted(0.2), test, &cfg, "adjoint").unwrap();
    let (bad, _) = evaluate_both(&Shifted(0.5), test, &cfg, "plain").unwrap();
    (good, bad)
}

#[test]
fn comparison_rows_hold_signed_deltas() {
    let test = test_split(40);
    let (good, bad) = reports(&test);
    let c = compare(&good, &bad).unwrap();
    let rmse = c.row("rmse").unwrap();
    assert!((rmse.delta - (rmse.adjoint - rmse.plain)).abs() < 1e-15);
    assert!((rmse.delta + 0.3).abs() < 1e-10);
    assert!(rmse.adjoint_better);
    assert_eq!(c.rows.len(), 8);

    let text = good.to_json().unwrap();
    assert_eq!(EvaluationReport::from_json(&text).unwrap(), good);
}

#[test]
fn comparing_different_splits_is_a_contract_error() {
    let (good, _) = reports(&test_split(40));
    let (_, other) = reports(&test_split(41));
    assert!(matches!(compare(&good, &other), Err(Error::Contract(_))));
    let test = test_split(40);
    let (_, multi) = evaluate_both(&Shifted(0.5), &test, &EvalConfig { mc_samples: 4, ..EvalConfig::default() }, "m").unwrap();
    assert!(matches!(compare(&good, &multi), Err(Error::Contract(_))));
}
