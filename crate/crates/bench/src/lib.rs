//! Benchmark fixtures shared by the criterion benches.

use adjoint_core::model::{AdjointModel, ModelConfig};
use adjoint_core::nn::Tensor;

/// Desk-scale model: 96-step lookback and horizon, 23 main features,
/// 3 calendar indicators.
pub fn desk_config() -> ModelConfig {
    ModelConfig {
        lookback: 96,
        horizon: 96,
        main_features: 23,
        ancillary_features: 3,
        ..ModelConfig::default()
    }
}

pub fn desk_model() -> AdjointModel {
    AdjointModel::new(desk_config(), 0).expect("valid config")
}

/// A smooth main window and a weekend-shaped indicator window.
pub fn inputs(config: &ModelConfig) -> (Tensor, Tensor) {
    let (l, m, a) = (config.lookback, config.main_features, config.ancillary_features);
    let x = (0..l * m).map(|i| (0.01 * i as f64).sin()).collect();
    let mut anc = vec![0.0; l * a];
    for step in l / 2..l {
        anc[step * a] = 1.0;
    }
    (
        Tensor::new(vec![l, m], x).expect("shape"),
        Tensor::new(vec![l, a], anc).expect("shape"),
    )
}
