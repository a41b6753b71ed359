//! Multi-horizon indoor temperature forecasting with an adjoint network:
//! an LSTM + feed-forward main network, a calendar-indicator ancillary
//! network, and a ReLU-weighted combiner, with MC-dropout intervals and
//! a three-perspective evaluation.

pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod uncertainty;

pub use error::{Error, Result};

pub use data::{RawSeries, SplitSpec, SynthConfig, WindowedDataset};
pub use metrics::{EvalConfig, EvalMode, EvaluationReport};
pub use model::{AdjointModel, Checkpoint, ModelConfig, TrainedModel, TrainingConfig, Variant};
pub use nn::Tensor;
pub use uncertainty::{ForecastWithCI, IntervalMode, SampleSet};
