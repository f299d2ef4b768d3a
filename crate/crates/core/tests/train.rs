mod common;

use grapool_core::autodiff::{Matrix, DEFAULT_STEP};
use grapool_core::graph_io::{
    split_dataset, synthetic, GraphDataset, GraphInstance, SeededRng, SplitSpec,
};
use grapool_core::layers::ParamStore;
use grapool_core::pooling::{AuxLossKind, PoolingKind};
use grapool_core::train::*;

fn small_dataset(count: usize, seed: u64) -> GraphDataset {
    synthetic::random_dataset(count, 5, 10, 3, 2, seed)
}

fn without_time(mut r: RunResult) -> RunResult {
    r.seconds = 0.0;
    r
}

#[test]
fn same_seed_same_parameters() {
    let a = build_model(4, 2, &ModelConfig::default(), 9).unwrap();
    let b = build_model(4, 2, &ModelConfig::default(), 9).unwrap();
    assert_eq!(a.params.values(), b.params.values());
    let c = build_model(4, 2, &ModelConfig::default(), 10).unwrap();
    assert_ne!(a.params.values(), c.params.values());
}

#[test]
fn first_and_last_weight_shapes() {
    let m = build_model(4, 2, &ModelConfig::default(), 0).unwrap();
    let values = m.params.values();
    assert_eq!(values[0].shape(), (4, 64));
    let last_weight = m
        .params
        .names()
        .iter()
        .rposition(|n| n.ends_with(".weight"))
        .unwrap();
    assert_eq!(values[last_weight].shape(), (64, 2));
}

#[test]
fn default_parameter_count_matches_tally() {
    let (f, h, c) = (4, 64, 2);
    // encoder W,b; input GCN; pool GCN and p; output GCN; classifier W,b.
    let tally = (f * h + h) + h * h + (h * h + h) + h * h + (h * c + c);
    let m = build_model(f, c, &ModelConfig::default(), 0).unwrap();
    assert_eq!(m.params.scalar_count(), tally);
    assert_eq!(tally, 12_802);
}

#[test]
fn invalid_combination_is_a_config_error() {
    let mut cfg = ModelConfig::new(PoolingKind::TopK);
    cfg.aux_loss = Some(AuxLossKind::Dmon);
    assert!(matches!(
        build_model(3, 2, &cfg, 0),
        Err(TrainError::Config(_))
    ));
    assert!(matches!(
        build_model(3, 2, &ModelConfig::new(PoolingKind::DiffPool), 0),
        Err(TrainError::Config(_))
    ));
}

#[test]
fn single_node_and_zero_feature_graphs() {
    for cfg in common::all_model_configs(16) {
        let m = build_model(3, 2, &cfg, 1).unwrap();
        let single = GraphInstance::new(
            Matrix::zeros(1, 1),
            Matrix::from_rows(&[[0.3, -0.2, 1.0]]),
            0,
        )
        .unwrap();
        let (logits, aux) = forward_graph(&m, &single).unwrap();
        assert_eq!(logits.shape(), (1, 2));
        assert!(logits.is_finite());
        assert_eq!(
            aux.is_some(),
            cfg.effective_aux_loss() != AuxLossKind::None,
            "{cfg:?}"
        );

        let zero = GraphInstance::from_edges(4, &[(0, 1), (1, 2)], Matrix::zeros(4, 3), 0).unwrap();
        let (logits, _) = forward_graph(&m, &zero).unwrap();
        // Every bias is zero at initialisation, so the bias pathway is zero.
        assert_eq!(logits, Matrix::zeros(1, 2), "{cfg:?}");
    }
}

#[test]
fn feature_dimension_mismatch_is_rejected() {
    let m = build_model(3, 2, &ModelConfig::default(), 1).unwrap();
    let g = GraphInstance::new(Matrix::zeros(2, 2), Matrix::ones(2, 5), 0).unwrap();
    assert!(forward_graph(&m, &g).is_err());
}

#[test]
fn logits_are_invariant_to_node_relabelling() {
    let mut rng = SeededRng::new(77);
    for cfg in common::all_model_configs(16) {
        let m = build_model(3, 2, &cfg, 5).unwrap();
        for _ in 0..5 {
            let n = 4 + rng.below(10);
            let g = common::tie_free_graph(&mut rng, n, 3, 0);
            let perm = common::random_permutation(&mut rng, n);
            let (a, _) = forward_graph(&m, &g).unwrap();
            let (b, _) = forward_graph(&m, &g.permuted(&perm)).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-9, "{cfg:?}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn cross_entropy_examples() {
    assert!(
        (cross_entropy_loss(&Matrix::from_rows(&[[0.0, 0.0]]), 1).unwrap() - 2f64.ln()).abs()
            < 1e-12
    );
    assert!(
        cross_entropy_loss(&Matrix::from_rows(&[[800.0, 0.0]]), 0)
            .unwrap()
            .abs()
            < 1e-11
    );
    assert!(cross_entropy_loss(&Matrix::from_rows(&[[0.0, 0.0]]), 2).is_err());
    let mut rng = SeededRng::new(0);
    for _ in 0..100 {
        let l = common::random_matrix(&mut rng, 1, 3, -20.0, 20.0);
        assert!(cross_entropy_loss(&l, rng.below(3)).unwrap() >= 0.0);
    }
}

#[test]
fn total_loss_is_the_batch_mean() {
    let ds = small_dataset(4, 3);
    let m = build_model(3, 2, &ModelConfig::default(), 2).unwrap();
    let one = |i: usize| total_loss(&m, &[&ds.graphs[i]]).unwrap();
    let both = total_loss(&m, &[&ds.graphs[0], &ds.graphs[1]]).unwrap();
    assert!((both.total - (one(0).total + one(1).total) / 2.0).abs() < 1e-12);
    assert!((both.aux - (one(0).aux + one(1).aux) / 2.0).abs() < 1e-12);

    let none = ModelConfig {
        aux_loss: Some(AuxLossKind::None),
        ..ModelConfig::default()
    };
    let m = build_model(3, 2, &none, 2).unwrap();
    let l = total_loss(&m, &[&ds.graphs[0], &ds.graphs[2]]).unwrap();
    assert_eq!((l.aux, l.total), (0.0, l.cross_entropy));
    let (logits, _) = forward_graph(&m, &ds.graphs[0]).unwrap();
    let single = total_loss(&m, &[&ds.graphs[0]]).unwrap();
    assert_eq!(
        single.total,
        cross_entropy_loss(&logits, ds.graphs[0].label()).unwrap()
    );
}

#[test]
fn batch_gradient_is_the_mean_of_graph_gradients() {
    let ds = small_dataset(3, 4);
    let m = build_model(3, 2, &ModelConfig::default(), 2).unwrap();
    let (_, g0) = accumulate_gradients(&m, &[&ds.graphs[0]]).unwrap();
    let (_, g1) = accumulate_gradients(&m, &[&ds.graphs[1]]).unwrap();
    let (_, g01) = accumulate_gradients(&m, &[&ds.graphs[0], &ds.graphs[1]]).unwrap();
    for ((a, b), ab) in g0.iter().zip(&g1).zip(&g01) {
        let mean = a.zip_map(b, |x, y| (x + y) / 2.0);
        assert!(mean.max_abs_diff(ab) < 1e-12);
    }
}

#[test]
fn sgd_step_examples() {
    let mut store = ParamStore::new();
    store.add("w", Matrix::scalar(1.0));
    let mut grads = vec![Matrix::scalar(2.0)];
    sgd_step(&mut store, &mut grads, 0.1).unwrap();
    assert!((store.values()[0].item() - 0.8).abs() < 1e-15);
    assert_eq!(grads[0], Matrix::scalar(0.0));

    sgd_step(&mut store, &mut grads, 0.1).unwrap();
    assert!((store.values()[0].item() - 0.8).abs() < 1e-15);
    let mut grads = vec![Matrix::scalar(5.0)];
    sgd_step(&mut store, &mut grads, 0.0).unwrap();
    assert!((store.values()[0].item() - 0.8).abs() < 1e-15);

    assert!(sgd_step(&mut store, &mut [], 0.1).is_err());
    assert!(sgd_step(&mut store, &mut [Matrix::zeros(2, 1)], 0.1).is_err());
}

#[test]
fn accuracy_counts_matching_predictions() {
    let ds = small_dataset(4, 5);
    let m = build_model(3, 2, &ModelConfig::default(), 3).unwrap();
    let preds: Vec<usize> = ds.graphs.iter().map(|g| predict(&m, g).unwrap()).collect();
    let relabel = |flip: &[bool]| {
        let graphs = ds
            .graphs
            .iter()
            .zip(&preds)
            .zip(flip)
            .map(|((g, &p), &f)| {
                GraphInstance::new(
                    g.adjacency().clone(),
                    g.features().clone(),
                    if f { 1 - p } else { p },
                )
                .unwrap()
            })
            .collect();
        GraphDataset::new("acc", graphs, 2).unwrap()
    };
    let all = [0, 1, 2, 3];
    assert_eq!(
        evaluate_accuracy(&m, &relabel(&[false; 4]), &all).unwrap(),
        1.0
    );
    assert_eq!(
        evaluate_accuracy(&m, &relabel(&[true; 4]), &all).unwrap(),
        0.0
    );
    assert_eq!(
        evaluate_accuracy(&m, &relabel(&[false, true, false, false]), &all).unwrap(),
        0.75
    );
    assert_eq!(
        evaluate_accuracy(&m, &relabel(&[false, true, false, false]), &[3, 1, 0, 2]).unwrap(),
        0.75
    );
    assert!(evaluate_accuracy(&m, &ds, &[]).is_err());
}

#[test]
fn argmax_ties_pick_the_lower_class() {
    let m = build_model(3, 3, &ModelConfig::default(), 3).unwrap();
    let zero = GraphInstance::new(Matrix::zeros(2, 2), Matrix::zeros(2, 3), 2).unwrap();
    assert_eq!(predict(&m, &zero).unwrap(), 0);
}

#[test]
fn model_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(21);
    for cfg in common::all_model_configs(8) {
        for k in 0..3 {
            let n = 5 + rng.below(4);
            let g = common::tie_free_graph(&mut rng, n, 3, k % 2);
            let mut m = build_model(3, 2, &cfg, k as u64).unwrap();
            common::randomize_biases(&mut m.params, k as u64);
            let r = check_model_gradients(&m, &g, DEFAULT_STEP).unwrap();
            assert!(r.max_rel_error < 1e-4, "{cfg:?}: {r:?}");
        }
    }
}

#[test]
fn patience_zero_stops_after_first_non_improving_epoch() {
    let ds = small_dataset(30, 6);
    let split = split_dataset(&ds, 0).unwrap();
    let cfg = TrainConfig {
        patience: 0,
        max_epochs: 50,
        ..TrainConfig::default()
    };
    let r = train_run(&ds, &split, &ModelConfig::new(PoolingKind::TopK), &cfg).unwrap();
    let first_flat = (1..r.val_accuracy.len())
        .find(|&e| {
            r.val_accuracy[e] <= r.val_accuracy[..e].iter().copied().fold(f64::MIN, f64::max)
        })
        .unwrap_or(49);
    assert_eq!(r.stopped_epoch, first_flat);
    assert_eq!(r.val_accuracy.len(), r.stopped_epoch + 1);
}

#[test]
fn early_stopping_reports_the_best_epoch() {
    let ds = small_dataset(40, 7);
    let split = split_dataset(&ds, 1).unwrap();
    let cfg = TrainConfig {
        patience: 3,
        max_epochs: 40,
        learning_rate: 0.05,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let r = train_run(&ds, &split, &ModelConfig::default(), &cfg).unwrap();
    let best = r.val_accuracy.iter().copied().fold(f64::MIN, f64::max);
    assert_eq!(r.best_val_accuracy, best);
    assert_eq!(
        r.best_epoch,
        r.val_accuracy.iter().position(|&v| v == best).unwrap()
    );
    assert!(r.best_epoch <= r.stopped_epoch);
    assert!(r.stopped_epoch == 39 || r.stopped_epoch == r.best_epoch + 3);
    assert!((0.0..=1.0).contains(&r.test_accuracy));
}

#[test]
fn training_is_deterministic() {
    let ds = small_dataset(30, 8);
    let seeds = RunSeeds::for_repeat(4, 2);
    let split = split_dataset(&ds, seeds.split).unwrap();
    let cfg = TrainConfig {
        max_epochs: 5,
        ..TrainConfig::default()
    }
    .with_seeds(seeds);
    let a = train_run(&ds, &split, &ModelConfig::default(), &cfg).unwrap();
    let b = train_run(&ds, &split, &ModelConfig::default(), &cfg).unwrap();
    assert_eq!(without_time(a), without_time(b));
}

#[test]
fn every_pooling_kind_overfits_twenty_graphs() {
    let ds = small_dataset(20, 3);
    let graphs: Vec<&GraphInstance> = ds.graphs.iter().collect();
    for kind in PoolingKind::ALL {
        let mut cfg = ModelConfig::new(*kind);
        if *kind == PoolingKind::DiffPool {
            cfg.clusters = Some(4);
        }
        let mut m = build_model(3, 2, &cfg, 1).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..500 {
            let (loss, mut grads) = accumulate_gradients(&m, &graphs).unwrap();
            best = best.min(loss.cross_entropy);
            if best < 0.1 {
                break;
            }
            sgd_step(&mut m.params, &mut grads, 0.3).unwrap();
        }
        assert!(best < 0.1, "{kind}: cross-entropy only reached {best}");
    }
}

#[test]
fn test_split_must_be_nonempty() {
    let ds = small_dataset(10, 9);
    let split = SplitSpec {
        seed: 0,
        train: vec![0, 1],
        val: vec![2],
        test: vec![],
    };
    assert!(train_run(
        &ds,
        &split,
        &ModelConfig::default(),
        &TrainConfig::default()
    )
    .is_err());
}
