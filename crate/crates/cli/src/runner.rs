use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use grapool_core::graph_io::{split_dataset, GraphDataset, SplitSpec};
use grapool_core::pooling::{DiffPool, PoolingKind};
use grapool_core::train::{train_run, ModelConfig, RunSeeds, TrainConfig};
use rayon::prelude::*;

use crate::record::{config_id, RunRecord, RunStatus, RECORD_SCHEMA_VERSION};
use crate::summary::{aggregate_records, load_records, write_csv, write_markdown};
use crate::{CliError, DatasetSpec, ExperimentConfig};

/// One run of the expanded grid, fully seeded.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    /// Index into the loaded datasets.
    pub dataset_index: usize,
    pub dataset: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub repeat: usize,
    pub base_seed: u64,
    pub seeds: RunSeeds,
    pub config_id: String,
    pub output_dir: PathBuf,
}

impl PlannedRun {
    pub fn record_path(&self) -> PathBuf {
        self.output_dir.join(RunRecord::file_name(
            &self.dataset,
            &self.config_id,
            self.repeat,
        ))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub planned: usize,
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Loads every dataset once and expands `configs` into seeded runs. Repeat
/// `r` uses [`RunSeeds::for_repeat`]`(base_seed, r)`.
pub fn plan_runs(
    configs: &[ExperimentConfig],
    data_root: Option<&Path>,
) -> Result<(Vec<PlannedRun>, Vec<GraphDataset>), CliError> {
    let mut specs: Vec<DatasetSpec> = Vec::new();
    let mut datasets = Vec::new();
    let mut runs = Vec::new();
    for cfg in configs {
        cfg.validate()?;
        for spec in &cfg.datasets {
            let index = match specs.iter().position(|s| s == spec) {
                Some(i) => i,
                None => {
                    datasets.push(spec.load(data_root)?);
                    specs.push(spec.clone());
                    specs.len() - 1
                }
            };
            let ds: &GraphDataset = &datasets[index];
            for mut model in cfg.model_configs() {
                if model.pooling == PoolingKind::DiffPool && model.clusters.is_none() {
                    model.clusters = Some(DiffPool::default_clusters(ds.mean_node_count()));
                }
                let train = cfg.train_config();
                let id = config_id(&model, &train);
                for repeat in 0..cfg.repeats {
                    let seeds = RunSeeds::for_repeat(cfg.base_seed, repeat as u64);
                    runs.push(PlannedRun {
                        dataset_index: index,
                        dataset: spec.name.clone(),
                        model: model.clone(),
                        train: train.clone().with_seeds(seeds),
                        repeat,
                        base_seed: cfg.base_seed,
                        seeds,
                        config_id: id.clone(),
                        output_dir: cfg.output_dir.clone(),
                    });
                }
            }
        }
    }
    Ok((runs, datasets))
}

fn majority_baseline(ds: &GraphDataset, split: &SplitSpec) -> f64 {
    let mut counts = vec![0usize; ds.num_classes];
    for &i in &split.train {
        counts[ds.graphs[i].label()] += 1;
    }
    let majority =
        (0..counts.len()).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
    if split.test.is_empty() {
        return 0.0;
    }
    let hits = split
        .test
        .iter()
        .filter(|&&i| ds.graphs[i].label() == majority)
        .count();
    hits as f64 / split.test.len() as f64
}

fn execute(run: &PlannedRun, ds: &GraphDataset) -> Result<RunRecord, CliError> {
    let split = split_dataset(ds, run.seeds.split)?;
    let (tr, va, te) = split.sizes();
    let outcome = train_run(ds, &split, &run.model, &run.train);
    let (status, error, result) = match outcome {
        Ok(r) => (RunStatus::Completed, None, Some(r)),
        Err(e) => (RunStatus::Failed, Some(e.to_string()), None),
    };
    Ok(RunRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        dataset: run.dataset.clone(),
        config_id: run.config_id.clone(),
        model: run.model.clone(),
        train: run.train.clone(),
        repeat: run.repeat,
        base_seed: run.base_seed,
        seeds: run.seeds,
        split_sizes: [tr, va, te],
        majority_baseline: majority_baseline(ds, &split),
        status,
        error,
        result,
    })
}

fn already_done(path: &Path) -> bool {
    RunRecord::read(path).is_ok_and(|r| r.status == RunStatus::Completed)
}

/// Runs every planned run not already completed on disk (all of them with
/// `force`) on `jobs` threads, then rewrites each output directory's
/// summary tables.
pub fn run_experiments(
    configs: &[ExperimentConfig],
    data_root: Option<&Path>,
    jobs: usize,
    force: bool,
) -> Result<RunSummary, CliError> {
    let (runs, datasets) = plan_runs(configs, data_root)?;
    let pending: Vec<&PlannedRun> = runs
        .iter()
        .filter(|r| force || !already_done(&r.record_path()))
        .collect();
    let mut summary = RunSummary {
        planned: runs.len(),
        skipped: runs.len() - pending.len(),
        executed: pending.len(),
        failed: 0,
    };
    log::info!(
        "{} runs planned, {} already complete, {} to execute on {jobs} thread(s)",
        summary.planned,
        summary.skipped,
        summary.executed
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let done = AtomicUsize::new(0);
    let total = pending.len();
    let records: Vec<Result<RunRecord, CliError>> = pool.install(|| {
        pending
            .par_iter()
            .map(|run| {
                let record = execute(run, &datasets[run.dataset_index])?;
                record.write(&run.output_dir)?;
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                match (&record.result, &record.error) {
                    (Some(r), _) => log::info!(
                        "[{n}/{total}] {} {} r{}: test {:.4} (best epoch {}, {:.1}s)",
                        run.dataset,
                        signature(&run.model),
                        run.repeat,
                        r.test_accuracy,
                        r.best_epoch,
                        r.seconds
                    ),
                    (None, e) => log::warn!(
                        "[{n}/{total}] {} {} r{} failed: {}",
                        run.dataset,
                        signature(&run.model),
                        run.repeat,
                        e.as_deref().unwrap_or("unknown error")
                    ),
                }
                Ok(record)
            })
            .collect()
    });
    for r in records {
        if r?.status == RunStatus::Failed {
            summary.failed += 1;
        }
    }

    let mut dirs: Vec<&Path> = configs.iter().map(|c| c.output_dir.as_path()).collect();
    dirs.sort();
    dirs.dedup();
    let mut any_completed = false;
    for dir in dirs {
        let table = aggregate_records(&load_records(dir)?);
        any_completed |= table.rows.iter().any(|r| r.n_runs > 0);
        write_csv(&table, &dir.join("summary.csv"))?;
        write_markdown(&table, &dir.join("summary.md"))?;
    }
    if summary.executed > 0 && !any_completed {
        return Err(CliError::AllRunsFailed(summary.failed));
    }
    Ok(summary)
}

/// Human-readable model label, e.g. `spapool[topk,cosine,diffpool]`.
pub fn signature(m: &ModelConfig) -> String {
    match m.pooling {
        PoolingKind::SpaPool => format!(
            "spapool[{},{},{}]",
            m.effective_selector().map_or("-", |s| s.as_str()),
            m.effective_aggregator().map_or("-", |a| a.as_str()),
            m.effective_aux_loss()
        ),
        other => other.to_string(),
    }
}
