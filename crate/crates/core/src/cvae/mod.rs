//! Conditional VAE world model: per-modality encoders fused at the decision
//! level into an encoded latent, an action-conditioning map into the
//! conditioned latent, and per-modality decoders predicting the next state.

mod batch;
pub mod checkpoint;
mod config;
pub mod eval;
mod layout;
pub mod loss;
mod model;
mod norm;
pub mod train;

use thiserror::Error;

use crate::fingersim::SimError;
use crate::numerics::NumericsError;

pub use batch::Batch;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RngState, MODEL_FILE};
pub use config::{Modality, ModelConfig, TrainConfig};
pub use eval::{baseline, evaluate, time_predictions, ModalityRmse, RmseReport};
pub use layout::{ParamSpec, LAYER_WIDTH};
pub use loss::{kl_closed_form, LossBreakdown};
pub use model::{Cvae, LatentBatch, Prediction, Sampling};
pub use norm::Normalizer;
pub use train::{mean_elbo, split_by_episode, train, train_with_progress, EpochLog, Split, TrainOutcome};

#[derive(Debug, Error)]
pub enum CvaeError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("frame lacks configured input modality {0}")]
    MissingModality(Modality),
    #[error("dataset: {0}")]
    Data(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: u64, last_good: Box<Checkpoint> },
    #[error("checkpoint I/O on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}
