use crate::autodiff::{Activation, AutodiffError, Tape, Tensor};
use crate::graph_io::SeededRng;
use crate::layers::{Bound, GcnLayer, ParamStore};

use super::{select_top, PoolOutput, TopKScorer};

/// Keeps `indices` of `(a, h)`, gating kept rows by `tanh(score)`.
fn gate_and_slice(
    tape: &mut Tape,
    a: Tensor,
    h: Tensor,
    scores: Tensor,
    ratio: f64,
) -> Result<PoolOutput, AutodiffError> {
    let sel = select_top(tape, h, scores, ratio)?;
    let gate = tape.tanh(sel.scores);
    let features = tape.scale_rows(sel.rep, gate)?;
    let adjacency = tape.select_square(a, &sel.indices)?;
    Ok(PoolOutput {
        adjacency,
        features,
        assignment: None,
        selected: Some(sel.indices),
        aux: None,
    })
}

/// Projection-score node dropping.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKPool {
    pub scorer: TopKScorer,
}

impl TopKPool {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        ratio: f64,
        rng: &mut SeededRng,
    ) -> Self {
        Self {
            scorer: TopKScorer::init(store, &format!("{name}.scorer"), dim, ratio, rng),
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        a: Tensor,
        h: Tensor,
    ) -> Result<PoolOutput, AutodiffError> {
        let scores = self.scorer.scores(tape, params, h)?;
        gate_and_slice(tape, a, h, scores, self.scorer.ratio)
    }
}

/// Node dropping scored by a one-column GCN.
#[derive(Debug, Clone, PartialEq)]
pub struct SagPool {
    pub score_gcn: GcnLayer,
    pub ratio: f64,
}

impl SagPool {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        ratio: f64,
        rng: &mut SeededRng,
    ) -> Self {
        Self {
            score_gcn: GcnLayer::init(
                store,
                &format!("{name}.score_gcn"),
                dim,
                1,
                Activation::Identity,
                rng,
            ),
            ratio,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        a: Tensor,
        a_norm: Tensor,
        h: Tensor,
    ) -> Result<PoolOutput, AutodiffError> {
        let scores = self.score_gcn.forward(tape, params, a_norm, h)?;
        if tape.shape(scores).1 != 1 {
            return Err(AutodiffError::Shape {
                op: "sagpool",
                lhs: tape.shape(scores),
                rhs: (tape.shape(scores).0, 1),
            });
        }
        gate_and_slice(tape, a, h, scores, self.ratio)
    }
}
