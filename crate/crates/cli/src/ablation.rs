use grapool_core::pooling::{AggregatorKind, AuxLossKind, PoolingKind, SelectorKind};
use serde::{Deserialize, Serialize};

use crate::{DatasetSpec, ExperimentConfig};

pub const DEFAULT_ABLATION_DATASETS: [&str; 5] =
    ["PROTEINS", "ENZYMES", "Mutagenicity", "OHSU", "IMDB-BINARY"];

/// Which SpaPool option an ablation varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    /// Top-K projection vs. SAG GCN scorer.
    Selection,
    /// Cosine, scalar product and attention affinities.
    Aggregation,
    /// DiffPool, DMoN and MinCut regularisers.
    Loss,
}

/// One SpaPool config per dataset and ablated value. Everything except the
/// ablated field is copied from `template`; the other two SpaPool options
/// take their defaults when the template leaves them unset.
pub fn ablation_matrix(
    kind: AblationKind,
    datasets: &[DatasetSpec],
    template: &ExperimentConfig,
) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for ds in datasets {
        let mut base = template.clone();
        base.datasets = vec![ds.clone()];
        base.pooling = vec![PoolingKind::SpaPool];
        base.selectors = vec![pick(&template.selectors, SelectorKind::TopK)];
        base.aggregators = vec![pick(&template.aggregators, AggregatorKind::Cosine)];
        base.aux_losses = vec![pick(&template.aux_losses, AuxLossKind::DiffPool)];
        base.clusters = None;
        match kind {
            AblationKind::Selection => {
                for &s in SelectorKind::ALL {
                    out.push(ExperimentConfig {
                        selectors: vec![s],
                        ..base.clone()
                    });
                }
            }
            AblationKind::Aggregation => {
                for &a in AggregatorKind::ALL {
                    out.push(ExperimentConfig {
                        aggregators: vec![a],
                        ..base.clone()
                    });
                }
            }
            AblationKind::Loss => {
                for l in [
                    AuxLossKind::DiffPool,
                    AuxLossKind::Dmon,
                    AuxLossKind::MinCut,
                ] {
                    out.push(ExperimentConfig {
                        aux_losses: vec![l],
                        ..base.clone()
                    });
                }
            }
        }
    }
    out
}

fn pick<T: Copy>(v: &[T], default: T) -> T {
    v.first().copied().unwrap_or(default)
}
