use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{grad_check_many, GradCheckReport, Matrix, Tape, Tensor};
use crate::graph_io::{batch_iter, GraphDataset, GraphInstance, SplitSpec};
use crate::layers::{Bound, ParamStore};
use crate::pooling::{DiffPool, PoolingKind};

use super::{build_model, Model, ModelConfig, TrainConfig, TrainError};

/// `−ln(softmax(logits)[label] + ε)` for a 1×C row of logits.
pub fn cross_entropy_loss(logits: &Matrix, label: usize) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let l = tape.constant(logits.clone());
    let loss = tape.cross_entropy(l, label)?;
    Ok(tape.value(loss).item())
}

/// Batch means of the classification and auxiliary losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cross_entropy: f64,
    pub aux: f64,
    pub total: f64,
}

fn graph_objective(
    model: &Model,
    tape: &mut Tape,
    params: &Bound,
    graph: &GraphInstance,
) -> Result<(Tensor, Option<Tensor>), TrainError> {
    let out = model.forward(tape, params, graph)?;
    let ce = tape.cross_entropy(out.logits, graph.label())?;
    Ok((ce, out.aux().map(|a| a.total)))
}

fn batch_pass(
    model: &Model,
    graphs: &[&GraphInstance],
    mut grads: Option<&mut [Matrix]>,
) -> Result<LossBreakdown, TrainError> {
    if graphs.is_empty() {
        return Err(TrainError::Config("empty batch".into()));
    }
    let scale = 1.0 / graphs.len() as f64;
    let (mut ce_sum, mut aux_sum) = (0.0, 0.0);
    for graph in graphs {
        let mut tape = Tape::new();
        let params = model.params.bind(&mut tape);
        let (ce, aux) = graph_objective(model, &mut tape, &params, graph)?;
        ce_sum += tape.value(ce).item();
        let total = match aux {
            Some(aux) => {
                aux_sum += tape.value(aux).item();
                tape.add(ce, aux)?
            }
            None => ce,
        };
        if let Some(acc) = grads.as_deref_mut() {
            let scaled = tape.scale(total, scale);
            tape.backward(scaled)?;
            for (slot, &t) in acc.iter_mut().zip(params.tensors()) {
                if let Some(g) = tape.grad(t) {
                    slot.axpy(1.0, g);
                }
            }
        }
    }
    let (ce, aux) = (ce_sum * scale, aux_sum * scale);
    Ok(LossBreakdown {
        cross_entropy: ce,
        aux,
        total: ce + aux,
    })
}

/// Finite-difference check of the per-graph objective (cross-entropy plus
/// auxiliary loss) against its gradient, over every model parameter.
pub fn check_model_gradients(
    model: &Model,
    graph: &GraphInstance,
    step: f64,
) -> Result<GradCheckReport, TrainError> {
    grad_check_many(
        |tape: &mut Tape, ts: &[Tensor]| {
            let params = Bound::from_tensors(ts.to_vec());
            let (ce, aux) = graph_objective(model, tape, &params, graph)?;
            Ok(match aux {
                Some(aux) => tape.add(ce, aux)?,
                None => ce,
            })
        },
        model.params.values(),
        step,
    )
}

/// Mean cross-entropy plus mean auxiliary loss over `graphs`.
pub fn total_loss(model: &Model, graphs: &[&GraphInstance]) -> Result<LossBreakdown, TrainError> {
    batch_pass(model, graphs, None)
}

/// [`total_loss`] and its gradient with respect to every parameter, in
/// store order. Each graph is differentiated on its own tape and the
/// gradients are summed with weight `1/len`.
pub fn accumulate_gradients(
    model: &Model,
    graphs: &[&GraphInstance],
) -> Result<(LossBreakdown, Vec<Matrix>), TrainError> {
    let mut grads: Vec<Matrix> = model
        .params
        .values()
        .iter()
        .map(|v| Matrix::zeros(v.rows(), v.cols()))
        .collect();
    let loss = batch_pass(model, graphs, Some(&mut grads))?;
    Ok((loss, grads))
}

/// `w ← w − η·g` for every parameter, then zeroes `grads`.
pub fn sgd_step(
    params: &mut ParamStore,
    grads: &mut [Matrix],
    learning_rate: f64,
) -> Result<(), TrainError> {
    if grads.len() != params.len() {
        return Err(TrainError::Config(format!(
            "{} gradients for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    for (i, (w, g)) in params
        .values_mut()
        .iter_mut()
        .zip(grads.iter_mut())
        .enumerate()
    {
        if w.shape() != g.shape() {
            return Err(TrainError::Config(format!(
                "gradient {i} is {:?}, parameter is {:?}",
                g.shape(),
                w.shape()
            )));
        }
        w.axpy(-learning_rate, g);
        g.fill(0.0);
    }
    Ok(())
}

/// Index of the largest logit; ties go to the lower class.
pub fn predict(model: &Model, graph: &GraphInstance) -> Result<usize, TrainError> {
    let (logits, _) = super::forward_graph(model, graph)?;
    let row = logits.as_slice();
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Fraction of `indices` whose prediction matches the label.
pub fn evaluate_accuracy(
    model: &Model,
    dataset: &GraphDataset,
    indices: &[usize],
) -> Result<f64, TrainError> {
    if indices.is_empty() {
        return Err(TrainError::Config(
            "cannot evaluate accuracy on an empty set".into(),
        ));
    }
    let mut correct = 0usize;
    for &i in indices {
        let g = &dataset.graphs[i];
        if predict(model, g)? == g.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

/// Outcome of one training run. Epochs are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Mean training loss per epoch, weighted by batch size.
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_accuracy: f64,
    /// Test accuracy of the parameters from `best_epoch`.
    pub test_accuracy: f64,
    pub seconds: f64,
}

/// Trains on `split.train` with minibatch SGD, evaluates validation accuracy
/// after every epoch, and stops once `max(patience, 1)` epochs pass without
/// a strict improvement. The best-validation parameters are restored before
/// the test set is scored.
pub fn train_run(
    dataset: &GraphDataset,
    split: &SplitSpec,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<RunResult, TrainError> {
    train_config.validate()?;
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(TrainError::Config(format!(
            "empty partition in split {:?}",
            split.sizes()
        )));
    }
    let mut config = model_config.clone();
    if config.pooling == PoolingKind::DiffPool && config.clusters.is_none() {
        config.clusters = Some(DiffPool::default_clusters(dataset.mean_node_count()));
    }
    let start = Instant::now();
    let mut model = build_model(
        dataset.feature_dim,
        dataset.num_classes,
        &config,
        train_config.init_seed,
    )?;

    let mut train_loss = Vec::new();
    let mut val_accuracy = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut best_params = model.params.clone();
    let mut since_best = 0usize;
    let mut stopped_epoch = 0;
    for epoch in 0..train_config.max_epochs {
        let batches = batch_iter(
            &split.train,
            train_config.batch_size,
            train_config.shuffle_seed,
            epoch as u64,
        );
        let mut loss_sum = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let graphs: Vec<&GraphInstance> = batch.iter().map(|&i| &dataset.graphs[i]).collect();
            let (loss, mut grads) = accumulate_gradients(&model, &graphs)?;
            if !loss.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                log::error!("non-finite loss at epoch {epoch}, batch {b}: {loss:?}");
                return Err(TrainError::NonFiniteLoss { epoch, batch: b });
            }
            sgd_step(&mut model.params, &mut grads, train_config.learning_rate)?;
            loss_sum += loss.total * graphs.len() as f64;
        }
        train_loss.push(loss_sum / split.train.len() as f64);
        let val = evaluate_accuracy(&model, dataset, &split.val)?;
        val_accuracy.push(val);
        log::debug!("epoch {epoch}: loss {:.6} val {val:.4}", train_loss[epoch]);
        stopped_epoch = epoch;
        if val > best.0 {
            best = (val, epoch);
            best_params = model.params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= train_config.patience.max(1) {
                break;
            }
        }
    }
    model.params = best_params;
    let test_accuracy = evaluate_accuracy(&model, dataset, &split.test)?;
    Ok(RunResult {
        train_loss,
        val_accuracy,
        best_epoch: best.1,
        stopped_epoch,
        best_val_accuracy: best.0,
        test_accuracy,
        seconds: start.elapsed().as_secs_f64(),
    })
}
