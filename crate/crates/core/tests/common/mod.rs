#![allow(dead_code)]

use grapool_core::autodiff::Matrix;
use grapool_core::graph_io::{synthetic::random_graph, GraphInstance, SeededRng};
use grapool_core::layers::ParamStore;
use grapool_core::pooling::{AggregatorKind, AuxLossKind, PoolingKind, SelectorKind};
use grapool_core::train::ModelConfig;

/// Erdős–Rényi graph with continuous random features, so scores are
/// distinct with probability one.
pub fn tie_free_graph(
    rng: &mut SeededRng,
    n: usize,
    features: usize,
    label: usize,
) -> GraphInstance {
    random_graph(rng, n, 0.5, features, label)
}

pub fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.uniform(lo, hi))
}

pub fn random_permutation(rng: &mut SeededRng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut p);
    p
}

/// Moves zero-initialised biases to random values so finite differences
/// are taken away from ReLU kinks at the origin.
pub fn randomize_biases(store: &mut ParamStore, seed: u64) {
    let mut rng = SeededRng::new(seed);
    for (name, value) in store.names().to_vec().iter().zip(store.values_mut()) {
        if name.ends_with(".bias") {
            for x in value.as_mut_slice() {
                *x = rng.uniform(-0.5, 0.5);
            }
        }
    }
}

/// One config per pooling kind, SpaPool aggregator, selector and
/// auxiliary loss.
pub fn all_model_configs(hidden: usize) -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for &aggregator in AggregatorKind::ALL {
        for &aux in AuxLossKind::ALL {
            let mut m = ModelConfig::new(PoolingKind::SpaPool);
            m.aggregator = Some(aggregator);
            m.aux_loss = Some(aux);
            out.push(m);
        }
    }
    let mut sag = ModelConfig::new(PoolingKind::SpaPool);
    sag.selector = Some(SelectorKind::SagPool);
    out.push(sag);
    out.push(ModelConfig::new(PoolingKind::TopK));
    out.push(ModelConfig::new(PoolingKind::SagPool));
    let mut diff = ModelConfig::new(PoolingKind::DiffPool);
    diff.clusters = Some(3);
    out.push(diff);
    for m in &mut out {
        m.hidden = hidden;
    }
    out
}
