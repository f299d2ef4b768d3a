use serde::{Deserialize, Serialize};

use crate::graph_io::derive_seed;
use crate::pooling::{AggregatorKind, AuxLossKind, PoolingKind, SelectorKind};

use super::TrainError;

fn default_hidden() -> usize {
    64
}

fn default_ratio() -> f64 {
    0.5
}

/// Architecture of the classifier.
///
/// `aggregator`, `aux_loss` and `selector` only apply to SpaPool; leaving
/// them unset picks cosine, the DiffPool losses and Top-K scoring.
/// `clusters` only applies to DiffPool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub pooling: PoolingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregator: Option<AggregatorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_loss: Option<AuxLossKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<SelectorKind>,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(PoolingKind::SpaPool)
    }
}

impl ModelConfig {
    pub fn new(pooling: PoolingKind) -> Self {
        Self {
            pooling,
            aggregator: None,
            aux_loss: None,
            selector: None,
            hidden: default_hidden(),
            ratio: default_ratio(),
            clusters: None,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if self.hidden == 0 {
            return bad("hidden width must be positive".into());
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return bad(format!("pooling ratio {} outside (0, 1]", self.ratio));
        }
        if self.pooling != PoolingKind::SpaPool {
            for (field, set) in [
                ("aggregator", self.aggregator.is_some()),
                ("selector", self.selector.is_some()),
            ] {
                if set {
                    return bad(format!(
                        "{field} is only meaningful for spapool, not {}",
                        self.pooling
                    ));
                }
            }
            let aux_ok = match self.pooling {
                PoolingKind::DiffPool => {
                    matches!(self.aux_loss, None | Some(AuxLossKind::DiffPool))
                }
                _ => self.aux_loss.is_none(),
            };
            if !aux_ok {
                return bad(format!(
                    "aux_loss is only configurable for spapool, not {}",
                    self.pooling
                ));
            }
        }
        if self.clusters.is_some() && self.pooling != PoolingKind::DiffPool {
            return bad(format!(
                "clusters is only meaningful for diffpool, not {}",
                self.pooling
            ));
        }
        if self.clusters == Some(0) {
            return bad("clusters must be positive".into());
        }
        Ok(())
    }

    /// The aggregator in effect, `None` for operators without one.
    pub fn effective_aggregator(&self) -> Option<AggregatorKind> {
        (self.pooling == PoolingKind::SpaPool)
            .then(|| self.aggregator.unwrap_or(AggregatorKind::Cosine))
    }

    pub fn effective_selector(&self) -> Option<SelectorKind> {
        (self.pooling == PoolingKind::SpaPool).then(|| self.selector.unwrap_or(SelectorKind::TopK))
    }

    pub fn effective_aux_loss(&self) -> AuxLossKind {
        match self.pooling {
            PoolingKind::SpaPool => self.aux_loss.unwrap_or(AuxLossKind::DiffPool),
            PoolingKind::DiffPool => AuxLossKind::DiffPool,
            PoolingKind::TopK | PoolingKind::SagPool => AuxLossKind::None,
        }
    }
}

/// Optimiser and schedule. Defaults: η = 5e-4, batches of 64, at most 500
/// epochs, patience 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            batch_size: 64,
            max_epochs: 500,
            patience: 100,
            init_seed: 0,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seeds(mut self, seeds: RunSeeds) -> Self {
        self.init_seed = seeds.init;
        self.shuffle_seed = seeds.shuffle;
        self
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(TrainError::Config(format!(
                "learning rate {} is not usable",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::Config("max epochs must be positive".into()));
        }
        Ok(())
    }
}

/// The three independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub split: u64,
    pub init: u64,
    pub shuffle: u64,
}

impl RunSeeds {
    /// Seeds of repeat `r`: the split uses `base + r`, initialisation and
    /// batch order use [`derive_seed`] with labels `"init"` and `"shuffle"`.
    pub fn for_repeat(base: u64, repeat: u64) -> Self {
        Self {
            split: base.wrapping_add(repeat),
            init: derive_seed(base, repeat, "init"),
            shuffle: derive_seed(base, repeat, "shuffle"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let t = TrainConfig::default();
        assert_eq!(
            (t.learning_rate, t.batch_size, t.max_epochs, t.patience),
            (5e-4, 64, 500, 100)
        );
        let m = ModelConfig::default();
        assert_eq!((m.hidden, m.ratio), (64, 0.5));
        assert_eq!(m.effective_aux_loss(), AuxLossKind::DiffPool);
        assert_eq!(m.effective_aggregator(), Some(AggregatorKind::Cosine));
    }

    #[test]
    fn rejects_options_on_other_poolers() {
        let mut m = ModelConfig::new(PoolingKind::TopK);
        m.aggregator = Some(AggregatorKind::Scalar);
        assert!(m.validate().is_err());
        let mut m = ModelConfig::new(PoolingKind::SagPool);
        m.aux_loss = Some(AuxLossKind::MinCut);
        assert!(m.validate().is_err());
        let mut m = ModelConfig::new(PoolingKind::DiffPool);
        m.aux_loss = Some(AuxLossKind::DiffPool);
        assert!(m.validate().is_ok());
        let mut m = ModelConfig::new(PoolingKind::SpaPool);
        m.ratio = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_uses_snake_case_names() {
        let m: ModelConfig =
            serde_json::from_str(r#"{"pooling":"spapool","aggregator":"attention"}"#).unwrap();
        assert_eq!(m.aggregator, Some(AggregatorKind::Attention));
        assert!(serde_json::from_str::<ModelConfig>(r#"{"pooling":"asapool"}"#).is_err());
    }

    #[test]
    fn repeat_seeds() {
        let s = RunSeeds::for_repeat(100, 3);
        assert_eq!(s.split, 103);
        assert_ne!(s.init, s.shuffle);
        assert_eq!(s, RunSeeds::for_repeat(100, 3));
    }
}
