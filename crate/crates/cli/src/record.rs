use std::fs;
use std::path::{Path, PathBuf};

use grapool_core::train::{ModelConfig, RunResult, RunSeeds, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

/// One run on disk: the full configuration echo, the seeds that reproduce
/// it, and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub dataset: String,
    pub config_id: String,
    pub model: ModelConfig,
    /// Includes the init and shuffle seeds actually used.
    pub train: TrainConfig,
    pub repeat: usize,
    pub base_seed: u64,
    pub seeds: RunSeeds,
    /// Train, validation and test sizes.
    pub split_sizes: [usize; 3],
    /// Test accuracy of always predicting the most frequent training class.
    pub majority_baseline: f64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub result: Option<RunResult>,
}

impl RunRecord {
    pub fn file_name(dataset: &str, config_id: &str, repeat: usize) -> String {
        let safe: String = dataset
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        format!("{safe}__{config_id}__r{repeat:03}.json")
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(Self::file_name(&self.dataset, &self.config_id, self.repeat))
    }

    pub fn test_accuracy(&self) -> Option<f64> {
        match (self.status, &self.result) {
            (RunStatus::Completed, Some(r)) => Some(r.test_accuracy),
            _ => None,
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = self.path_in(dir);
        let text = serde_json::to_string_pretty(self).expect("records serialise");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Short stable identifier of a model and optimiser configuration, seeds
/// excluded: the first 12 hex digits of the SHA-256 of their JSON.
pub fn config_id(model: &ModelConfig, train: &TrainConfig) -> String {
    let unseeded = TrainConfig {
        init_seed: 0,
        shuffle_seed: 0,
        ..train.clone()
    };
    let canonical = serde_json::to_string(&(model, &unseeded)).expect("configs serialise");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes through a temporary sibling and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use grapool_core::pooling::PoolingKind;

    #[test]
    fn config_id_ignores_seeds_only() {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let seeded = t.clone().with_seeds(RunSeeds::for_repeat(5, 1));
        assert_eq!(config_id(&m, &t), config_id(&m, &seeded));
        assert_eq!(config_id(&m, &t).len(), 12);
        let other = TrainConfig {
            learning_rate: 1e-3,
            ..t.clone()
        };
        assert_ne!(config_id(&m, &t), config_id(&m, &other));
        assert_ne!(
            config_id(&m, &t),
            config_id(&ModelConfig::new(PoolingKind::TopK), &t)
        );
    }

    #[test]
    fn file_names_are_filesystem_safe() {
        assert_eq!(
            RunRecord::file_name("IMDB-BINARY", "abc", 7),
            "IMDB-BINARY__abc__r007.json"
        );
        assert_eq!(RunRecord::file_name("a/b c", "x", 0), "a_b_c__x__r000.json");
    }
}
