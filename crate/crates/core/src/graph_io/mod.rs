//! Graph datasets: TUDataset parsing, feature imputation, seeded splits and
//! batch orders.

mod dataset;
mod rng;
mod split;
pub mod synthetic;
mod tudataset;

use std::path::PathBuf;

pub use dataset::{impute_features, DatasetStats, GraphDataset, GraphInstance};
pub use rng::{derive_seed, SeededRng};
pub use split::{batch_iter, split_indices, SplitSpec};
pub use tudataset::{parse_tudataset, resolve_dataset_dir, write_tudataset};

#[derive(Debug, thiserror::Error)]
pub enum GraphIoError {
    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {msg}")]
    Format {
        file: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid graph data: {0}")]
    Invalid(String),
}

/// 80/10/10 split of `dataset` from `seed`.
pub fn split_dataset(dataset: &GraphDataset, seed: u64) -> Result<SplitSpec, GraphIoError> {
    split_indices(dataset.len(), seed)
}
