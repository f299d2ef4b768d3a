//! Seeded experiment grids over the grapool pooling operators: JSON
//! configs in, one JSON record per run out, mean±std tables on top.

pub mod ablation;
pub mod config;
pub mod error;
pub mod record;
pub mod runner;
pub mod summary;

pub use ablation::{ablation_matrix, AblationKind, DEFAULT_ABLATION_DATASETS};
pub use config::{DatasetSpec, ExperimentConfig, SyntheticSpec, TrainOverrides, DATA_DIR_ENV};
pub use error::CliError;
pub use record::{config_id, RunRecord, RunStatus, RECORD_SCHEMA_VERSION};
pub use runner::{plan_runs, run_experiments, signature, PlannedRun, RunSummary};
pub use summary::{
    aggregate_records, load_records, read_csv, render_markdown, write_csv, write_markdown,
    SummaryRow, SummaryTable,
};
