pub mod adjoint;
pub mod batch;
pub mod checkpoint;
pub mod config;
pub mod forecaster;
pub mod train;

pub use adjoint::{validate_indicators, AdjointModel, Variant};
pub use batch::Batch;
pub use checkpoint::{Checkpoint, CheckpointModel, ParamRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{CombinerShape, ModelConfig};
pub use forecaster::{load_forecaster, Forecaster, OracleForecaster, TrainedModel};
pub use train::{dataset_rmse, train, StageReport, TrainingConfig, TrainingReport};
