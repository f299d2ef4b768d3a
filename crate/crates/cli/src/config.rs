use std::path::{Path, PathBuf};

use grapool_core::graph_io::{parse_tudataset, resolve_dataset_dir, synthetic, GraphDataset};
use grapool_core::pooling::{AggregatorKind, AuxLossKind, PoolingKind, SelectorKind};
use grapool_core::train::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Default dataset root when neither the config nor the command line names one.
pub const DATA_DIR_ENV: &str = "GRAPOOL_DATA_DIR";

/// Parameters of the generated clique-vs-cycle dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub count: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            count: 200,
            min_nodes: 10,
            max_nodes: 20,
            seed: 0,
        }
    }
}

/// A TU dataset under `path` (or the default root), or a generated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl DatasetSpec {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            path: None,
            synthetic: None,
        }
    }

    pub fn load(&self, default_root: Option<&Path>) -> Result<GraphDataset, CliError> {
        if let Some(s) = &self.synthetic {
            if s.min_nodes < 3 || s.min_nodes > s.max_nodes || s.count < 3 {
                return Err(CliError::Config(format!(
                    "bad synthetic spec for {}: {s:?}",
                    self.name
                )));
            }
            let mut ds = synthetic::clique_vs_cycle(s.count, s.min_nodes, s.max_nodes, s.seed);
            ds.name = self.name.clone();
            return Ok(ds);
        }
        let root = self.path.as_deref().or(default_root).ok_or_else(|| {
            CliError::NoData(format!(
                "no dataset root for {}; pass --data-dir or set {DATA_DIR_ENV}",
                self.name
            ))
        })?;
        if !root.is_dir() {
            return Err(CliError::NoData(format!(
                "dataset root {} does not exist",
                root.display()
            )));
        }
        let dir = resolve_dataset_dir(root, &self.name).ok_or_else(|| {
            CliError::Config(format!(
                "dataset {} not found under {}",
                self.name,
                root.display()
            ))
        })?;
        Ok(parse_tudataset(&dir, &self.name)?)
    }
}

/// Optional replacements for the default optimiser settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(&self, mut base: TrainConfig) -> TrainConfig {
        if let Some(v) = self.learning_rate {
            base.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            base.batch_size = v;
        }
        if let Some(v) = self.max_epochs {
            base.max_epochs = v;
        }
        if let Some(v) = self.patience {
            base.patience = v;
        }
        base
    }
}

fn default_pooling() -> Vec<PoolingKind> {
    vec![PoolingKind::SpaPool]
}

fn default_repeats() -> usize {
    10
}

/// One experiment file: every dataset is crossed with every model variant
/// and repeated `repeats` times.
///
/// The SpaPool options (`aggregators`, `aux_losses`, `selectors`) form a
/// grid; an empty list means the default. They are ignored by the other
/// pooling kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_pooling")]
    pub pooling: Vec<PoolingKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregators: Vec<AggregatorKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aux_losses: Vec<AuxLossKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selectors: Vec<SelectorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub train: TrainOverrides,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(datasets: Vec<DatasetSpec>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            datasets,
            pooling: default_pooling(),
            aggregators: Vec::new(),
            aux_losses: Vec::new(),
            selectors: Vec::new(),
            hidden: None,
            ratio: None,
            clusters: None,
            repeats: default_repeats(),
            base_seed: 0,
            train: TrainOverrides::default(),
            output_dir: output_dir.into(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.repeats == 0 {
            return Err(CliError::Config("repeats must be at least 1".into()));
        }
        if self.datasets.is_empty() {
            return Err(CliError::Config("no datasets listed".into()));
        }
        if self.pooling.is_empty() {
            return Err(CliError::Config("no pooling kinds listed".into()));
        }
        for m in self.model_configs() {
            m.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.train_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Training settings before per-run seeds are filled in.
    pub fn train_config(&self) -> TrainConfig {
        self.train.apply(TrainConfig::default())
    }

    /// Every model variant of the grid with SpaPool options made explicit.
    pub fn model_configs(&self) -> Vec<ModelConfig> {
        fn or_default<T: Copy>(v: &[T]) -> Vec<Option<T>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        }
        let mut out = Vec::new();
        for &pooling in &self.pooling {
            let mut base = ModelConfig::new(pooling);
            if let Some(h) = self.hidden {
                base.hidden = h;
            }
            if let Some(r) = self.ratio {
                base.ratio = r;
            }
            if pooling == PoolingKind::DiffPool {
                base.clusters = self.clusters;
            }
            if pooling != PoolingKind::SpaPool {
                out.push(base);
                continue;
            }
            for &selector in &or_default(&self.selectors) {
                for &aggregator in &or_default(&self.aggregators) {
                    for &aux in &or_default(&self.aux_losses) {
                        let mut m = base.clone();
                        m.selector = selector;
                        m.aggregator = aggregator;
                        m.aux_loss = aux;
                        m.selector = m.effective_selector();
                        m.aggregator = m.effective_aggregator();
                        m.aux_loss = Some(m.effective_aux_loss());
                        out.push(m);
                    }
                }
            }
        }
        out
    }
}
