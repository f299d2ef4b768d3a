//! Generated datasets for tests and sanity runs.

use crate::autodiff::Matrix;

use super::{GraphDataset, GraphInstance, SeededRng};

/// Two classes: complete graphs (label 0) and cycles (label 1), with node
/// counts uniform in `min_nodes..=max_nodes` and classes alternating.
/// Node order is shuffled and each node carries the features `[1, degree]`.
pub fn clique_vs_cycle(
    count: usize,
    min_nodes: usize,
    max_nodes: usize,
    seed: u64,
) -> GraphDataset {
    assert!(min_nodes >= 3 && min_nodes <= max_nodes);
    let mut rng = SeededRng::new(seed);
    let graphs = (0..count)
        .map(|g| {
            let n = min_nodes + rng.below(max_nodes - min_nodes + 1);
            let label = g % 2;
            let mut edges = Vec::new();
            if label == 0 {
                for i in 0..n {
                    for j in i + 1..n {
                        edges.push((i, j));
                    }
                }
            } else {
                edges.extend((0..n).map(|i| (i, (i + 1) % n)));
            }
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let edges: Vec<(usize, usize)> =
                edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
            let degree = if label == 0 { (n - 1) as f64 } else { 2.0 };
            GraphInstance::from_edges(
                n,
                &edges,
                Matrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { degree }),
                label,
            )
            .expect("generated graph is well formed")
        })
        .collect();
    GraphDataset::new("clique_vs_cycle", graphs, 2).expect("consistent dataset")
}

/// Erdős–Rényi graph with uniform(−1, 1) features.
pub fn random_graph(
    rng: &mut SeededRng,
    node_count: usize,
    edge_prob: f64,
    feature_dim: usize,
    label: usize,
) -> GraphInstance {
    let mut edges = Vec::new();
    for i in 0..node_count {
        for j in i + 1..node_count {
            if rng.unit_f64() < edge_prob {
                edges.push((i, j));
            }
        }
    }
    let features = Matrix::from_fn(node_count, feature_dim, |_, _| rng.uniform(-1.0, 1.0));
    GraphInstance::from_edges(node_count, &edges, features, label)
        .expect("generated graph is well formed")
}

/// Random dataset of `count` Erdős–Rényi graphs with random labels.
pub fn random_dataset(
    count: usize,
    min_nodes: usize,
    max_nodes: usize,
    feature_dim: usize,
    num_classes: usize,
    seed: u64,
) -> GraphDataset {
    let mut rng = SeededRng::new(seed);
    let graphs = (0..count)
        .map(|_| {
            let n = min_nodes + rng.below(max_nodes - min_nodes + 1);
            let label = rng.below(num_classes);
            random_graph(&mut rng, n, 0.3, feature_dim, label)
        })
        .collect();
    GraphDataset::new("random", graphs, num_classes).expect("consistent dataset")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clique_and_cycle_edge_counts() {
        let ds = clique_vs_cycle(20, 10, 20, 1);
        for g in &ds.graphs {
            let n = g.node_count();
            assert!((10..=20).contains(&n));
            let expected = if g.label() == 0 { n * (n - 1) / 2 } else { n };
            assert_eq!(g.edge_count(), expected);
        }
        assert_eq!(ds.class_counts(), vec![10, 10]);
    }
}
