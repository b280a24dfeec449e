//! The singing-voice detector: a small convolutional network over log-mel
//! patches, its Adamax trainer, smoothed sequence prediction and the model
//! file format.

mod adamax;
mod arch;
mod file;
mod model;
mod predict;
mod train;

pub use adamax::{Adamax, AdamaxConfig};
pub use arch::{Architecture, LayerSpec, Shape, INPUT_SHAPE};
pub use file::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION};
pub use model::{cross_entropy, cross_entropy_logit, sigmoid, Gradients, SvdModel, Tensor, Trace};
pub use predict::{median_filter, predict_raw, predict_sequence, PredictionSequence, DEFAULT_MEDIAN_WIDTH};
pub use train::{fit_standardization, train, EpochStats, ExampleSource, TrainerConfig, TrainingExample, TrainingLog};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    Numerics { epoch: usize, batch: usize, loss: f64 },
    #[error("model format error: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Free-function form of [`SvdModel::init`].
pub fn init_model(arch: Architecture, seed: u64) -> Result<SvdModel, ModelError> {
    SvdModel::init(arch, seed)
}
