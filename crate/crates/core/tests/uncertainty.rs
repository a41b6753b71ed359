use adjoint_core::model::{AdjointModel, ModelConfig};
use adjoint_core::nn::Tensor;
use adjoint_core::rng;
use adjoint_core::uncertainty::{
    coverage, derive_ci, half_width_factor, mc_sample, IntervalMode, Level, SampleSet,
};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

fn config(dropout: f64) -> ModelConfig {
    ModelConfig {
        lookback: 6,
        horizon: 4,
        main_features: 3,
        ancillary_features: 3,
        lstm_hidden: 5,
        lstm_layers: 1,
        main_hidden: vec![16, 16],
        ancillary_hidden: vec![8],
        dropout,
        ..ModelConfig::default()
    }
}

fn window() -> (Tensor, Tensor) {
    let x: Vec<f64> = (0..18).map(|i| (0.7 * i as f64).cos()).collect();
    let mut a = vec![0.0; 18];
    for step in 3..6 {
        a[step * 3] = 1.0;
    }
    (Tensor::new(vec![6, 3], x).unwrap(), Tensor::new(vec![6, 3], a).unwrap())
}

fn model(dropout: f64) -> AdjointModel {
    let mut m = AdjointModel::new(config(dropout), 4).unwrap();
    for name in ["main.dense2.bias", "ancillary.dense1.bias"] {
        let id = m.store.find(name).unwrap();
        m.store.get_mut(id).tensor.data_mut().fill(2.0);
    }
    m
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let m = model(0.1);
    let (x, a) = window();
    let s1 = mc_sample(&m, &x, &a, 200, 5).unwrap();
    let s2 = mc_sample(&m, &x, &a, 200, 5).unwrap();
    let s3 = mc_sample(&m, &x, &a, 200, 6).unwrap();
    assert_eq!(s1, s2);
    assert_ne!(s1.samples, s3.samples);
}

#[test]
fn zero_dropout_reproduces_the_point_forecast() {
    let m = model(0.0);
    let (x, a) = window();
    let point = m.predict(&x, &a).unwrap();
    let s = mc_sample(&m, &x, &a, 50, 1).unwrap();
    for i in 0..s.n_samples {
        assert_eq!(s.row(i), point.data());
    }
    let ci = derive_ci(&s, point.data().to_vec(), IntervalMode::Predictive).unwrap();
    assert!(ci.std.iter().all(|&v| v == 0.0));
    assert!(ci.degenerate);
}

#[test]
fn larger_sets_extend_smaller_ones() {
    let m = model(0.1);
    let (x, a) = window();
    let small = mc_sample(&m, &x, &a, 300, 8).unwrap();
    let large = mc_sample(&m, &x, &a, 1500, 8).unwrap();
    assert_eq!(&large.samples[..small.samples.len()], &small.samples[..]);
}

#[test]
fn independent_runs_agree_within_sampling_error() {
    let m = model(0.1);
    let (x, a) = window();
    let n = 1000;
    let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
        .map(|seed| mc_sample(&m, &x, &a, n, 100 + seed).unwrap().moments())
        .collect();
    let h = m.config.horizon;
    for j in 0..h {
        let grand = runs.iter().map(|(mu, _)| mu[j]).sum::<f64>() / runs.len() as f64;
        for (mu, sd) in &runs {
            let tol = 4.0 * sd[j] / (n as f64).sqrt();
            assert!(sd[j] > 0.0);
            assert!((mu[j] - grand).abs() <= tol, "step {j}: {} vs {grand} (tol {tol})", mu[j]);
        }
    }
}

#[test]
fn moments_ignore_row_order() {
    let m = model(0.1);
    let (x, a) = window();
    let s = mc_sample(&m, &x, &a, 400, 2).unwrap();
    let mut rows: Vec<Vec<f64>> = (0..s.n_samples).map(|i| s.row(i).to_vec()).collect();
    rows.shuffle(&mut rng::stream(0, "test.shuffle", 0));
    let shuffled = SampleSet::new(rows.concat(), s.n_samples, s.horizon, s.seed).unwrap();
    assert_eq!(shuffled.moments(), s.moments());
}

#[test]
fn mean_interval_narrows_with_root_n() {
    let a = half_width_factor(0.05, 400, IntervalMode::MeanCi).unwrap();
    let b = half_width_factor(0.05, 40_000, IntervalMode::MeanCi).unwrap();
    let ratio = a / b;
    assert!((ratio / 10.0 - 1.0).abs() < 0.01, "ratio {ratio}");
    let p1 = half_width_factor(0.05, 400, IntervalMode::Predictive).unwrap();
    let p2 = half_width_factor(0.05, 40_000, IntervalMode::Predictive).unwrap();
    assert_eq!(p1, p2);
}

#[test]
fn predictive_bands_are_calibrated_on_gaussian_draws() {
    let dist = Normal::new(70.0, 1.5).unwrap();
    let mut r = rng::stream(3, "test.calibration", 0);
    let n = 4000;
    let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut r)).collect();
    let set = SampleSet::new(draws, n, 1, 3).unwrap();
    let ci = derive_ci(&set, vec![70.0], IntervalMode::Predictive).unwrap();
    let truth: Vec<Vec<f64>> = (0..n).map(|_| vec![dist.sample(&mut r)]).collect();
    let cis = vec![ci; n];
    let nc68 = coverage(&truth, &cis, Level::L68).unwrap();
    let nc95 = coverage(&truth, &cis, Level::L95).unwrap();
    assert!((nc68 - 0.32).abs() < 0.03, "68% non-coverage {nc68}");
    assert!((nc95 - 0.05).abs() < 0.02, "95% non-coverage {nc95}");
}

#[test]
fn sample_sets_reject_bad_shapes() {
    assert!(SampleSet::new(vec![1.0, 2.0], 1, 2, 0).is_err());
    assert!(SampleSet::new(vec![1.0, 2.0, 3.0], 2, 2, 0).is_err());
    assert!(SampleSet::new(vec![1.0, f64::NAN], 2, 1, 0).is_err());
    let (x, a) = window();
    let bad = Tensor::new(vec![6, 3], vec![0.5; 18]).unwrap();
    assert!(mc_sample(&model(0.1), &x, &bad, 10, 0).is_err());
    assert!(mc_sample(&model(0.1), &x, &a, 1, 0).is_err());
}
