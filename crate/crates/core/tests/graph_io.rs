mod common;

use std::collections::BTreeSet;

use grapool_core::graph_io::{
    batch_iter, parse_tudataset, resolve_dataset_dir, split_indices, synthetic, write_tudataset,
    GraphDataset, GraphInstance, GraphIoError, SeededRng,
};
use proptest::prelude::*;

fn labelled_dataset(count: usize, seed: u64) -> GraphDataset {
    let mut rng = SeededRng::new(seed);
    let graphs: Vec<GraphInstance> = (0..count)
        .map(|g| {
            let n = 1 + rng.below(7);
            common::tie_free_graph(&mut rng, n, 3, g % 3)
        })
        .collect();
    GraphDataset::new("RT", graphs, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn write_then_parse_round_trips(count in 3usize..12, seed in any::<u64>()) {
        let ds = labelled_dataset(count, seed);
        let tmp = tempfile::tempdir().unwrap();
        write_tudataset(&ds, tmp.path()).unwrap();
        let back = parse_tudataset(tmp.path(), "RT").unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn split_partitions_every_index_once(len in 3usize..400, seed in any::<u64>()) {
        let s = split_indices(len, seed).unwrap();
        let (tr, va, te) = s.sizes();
        prop_assert_eq!(tr + va + te, len);
        prop_assert_eq!(va, te);
        prop_assert_eq!(va, (len / 10).max(1));
        let all: BTreeSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        prop_assert_eq!(all.len(), len);
        prop_assert_eq!(all.iter().next_back().copied(), Some(len - 1));
    }

    #[test]
    fn batches_cover_the_training_set(len in 1usize..300, bs in 1usize..80, seed in any::<u64>(), epoch in 0u64..5) {
        let idx: Vec<usize> = (0..len).map(|i| i * 3).collect();
        let batches = batch_iter(&idx, bs, seed, epoch);
        prop_assert_eq!(batches.len(), len.div_ceil(bs));
        prop_assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= bs));
        let mut flat: Vec<usize> = batches.concat();
        flat.sort_unstable();
        prop_assert_eq!(flat, idx);
    }
}

#[test]
fn missing_graph_labels_is_reported() {
    let ds = labelled_dataset(4, 1);
    let tmp = tempfile::tempdir().unwrap();
    write_tudataset(&ds, tmp.path()).unwrap();
    std::fs::remove_file(tmp.path().join("RT_graph_labels.txt")).unwrap();
    match parse_tudataset(tmp.path(), "RT") {
        Err(GraphIoError::MissingFile(p)) => assert!(p.ends_with("RT_graph_labels.txt")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn nested_raw_directory_is_found() {
    let ds = labelled_dataset(5, 2);
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("RT").join("raw");
    write_tudataset(&ds, &raw).unwrap();
    assert_eq!(resolve_dataset_dir(tmp.path(), "RT"), Some(raw));
    assert_eq!(resolve_dataset_dir(tmp.path(), "OTHER"), None);
}

#[test]
fn synthetic_dataset_is_balanced_and_sized() {
    let ds = synthetic::clique_vs_cycle(200, 10, 20, 0);
    assert_eq!(ds.len(), 200);
    assert_eq!(ds.class_counts(), vec![100, 100]);
    let stats = ds.stats();
    assert!(stats.mean_nodes >= 10.0 && stats.mean_nodes <= 20.0);
    assert!(ds
        .graphs
        .iter()
        .all(|g| (10..=20).contains(&g.node_count())));
    for g in &ds.graphs {
        let expected = if g.label() == 0 {
            g.node_count() * (g.node_count() - 1) / 2
        } else {
            g.node_count()
        };
        assert_eq!(g.edge_count(), expected);
    }
}

#[test]
fn population_std_of_node_counts() {
    let a = GraphInstance::from_edges(2, &[(0, 1)], grapool_core::autodiff::Matrix::ones(2, 1), 0)
        .unwrap();
    let b =
        GraphInstance::from_edges(4, &[], grapool_core::autodiff::Matrix::ones(4, 1), 1).unwrap();
    let ds = GraphDataset::new("S", vec![a, b], 2).unwrap();
    let s = ds.stats();
    assert_eq!((s.mean_nodes, s.std_nodes), (3.0, 1.0));
    assert_eq!((s.mean_edges, s.std_edges), (0.5, 0.5));
}
