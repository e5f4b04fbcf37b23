//! Learned maps between joint angles and sensor deltas.
//!
//! The pieces: a minimal row-major [`Mat`], a two-layer perceptron with
//! analytic gradients, affine input/output scalers, a seeded Adam trainer
//! with early stopping, and a versioned binary model format.

pub mod mat;
pub mod mlp;
pub mod model_file;
pub mod scaler;
pub mod train;

pub use mat::Mat;
pub use mlp::{Activation, Gradients, Mlp};
pub use model_file::{load_model, save_model};
pub use scaler::AffineScaler;
pub use train::{
    rmse_columns, split_indices, train, Direction, Optimizer, SplitIndices, TrainConfig,
    TrainOutcome, TrainedModel,
};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("input has {got} columns, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("x has {x_rows} rows but y has {y_rows}")]
    RowMismatch { x_rows: usize, y_rows: usize },
    #[error("dataset too small: {rows} rows leave an empty train, validation, or test split")]
    TooFewRows { rows: usize },
    #[error("inverse models need at least two sensor channels, got {0}")]
    TooFewSensors(usize),
    #[error("duplicate sensor channel {0:?}")]
    DuplicateSensor(String),
    #[error("unknown sensor channel {0:?}")]
    UnknownSensor(String),
    #[error("sensor list names {names} channels but the data has {cols} columns")]
    SensorArity { names: usize, cols: usize },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("model file {path}: {source}")]
    ModelIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file {path}: {reason}")]
    ModelFormat { path: PathBuf, reason: String },
}
