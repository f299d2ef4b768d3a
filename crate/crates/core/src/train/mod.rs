//! The graph classifier, its losses, and the SGD training loop with early
//! stopping on validation accuracy.

mod config;
mod fit;
mod model;

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::graph_io::GraphIoError;

pub use config::{ModelConfig, RunSeeds, TrainConfig};
pub use fit::{
    accumulate_gradients, check_model_gradients, cross_entropy_loss, evaluate_accuracy, predict,
    sgd_step, total_loss, train_run, LossBreakdown, RunResult,
};
pub use model::{build_model, forward_graph, GraphOutput, Model, PoolLayer};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Data(#[from] GraphIoError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}
