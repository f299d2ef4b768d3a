use crate::autodiff::{Activation, AutodiffError, Tape, Tensor};
use crate::graph_io::SeededRng;
use crate::layers::{Bound, GcnLayer, ParamStore};

use super::{
    affinity_cosine, affinity_scalar, aux_loss, connect_adjacency, reduce_embeddings, select_top,
    AggregatorKind, AttentionAggregator, AuxLossKind, PoolOutput, SelectorKind, TopKScorer,
    TopKSelection,
};

/// How nodes are scored before the representatives are picked.
#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    /// Projection `H_emb·p/‖p‖`.
    TopK(TopKScorer),
    /// One-column GCN on the embedding (no activation).
    SagPool { gcn: GcnLayer, ratio: f64 },
}

impl Selector {
    pub fn kind(&self) -> SelectorKind {
        match self {
            Selector::TopK(_) => SelectorKind::TopK,
            Selector::SagPool { .. } => SelectorKind::SagPool,
        }
    }

    fn select(
        &self,
        tape: &mut Tape,
        params: &Bound,
        a_norm: Tensor,
        h_emb: Tensor,
    ) -> Result<TopKSelection, AutodiffError> {
        match self {
            Selector::TopK(scorer) => {
                let scores = scorer.scores(tape, params, h_emb)?;
                select_top(tape, h_emb, scores, scorer.ratio)
            }
            Selector::SagPool { gcn, ratio } => {
                let scores = gcn.forward(tape, params, a_norm, h_emb)?;
                select_top(tape, h_emb, scores, *ratio)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Aggregator {
    Cosine,
    Scalar,
    Attention(AttentionAggregator),
}

impl Aggregator {
    pub fn kind(&self) -> AggregatorKind {
        match self {
            Aggregator::Cosine => AggregatorKind::Cosine,
            Aggregator::Scalar => AggregatorKind::Scalar,
            Aggregator::Attention(_) => AggregatorKind::Attention,
        }
    }

    pub fn logits(
        &self,
        tape: &mut Tape,
        params: &Bound,
        h: Tensor,
        centroids: Tensor,
    ) -> Result<Tensor, AutodiffError> {
        match self {
            Aggregator::Cosine => affinity_cosine(tape, h, centroids),
            Aggregator::Scalar => affinity_scalar(tape, h, centroids),
            Aggregator::Attention(att) => att.logits(tape, params, h, centroids),
        }
    }
}

/// Adaptive dense pooling: `⌈kN⌉` Top-K representatives become centroids
/// and every node is soft-assigned to them.
///
/// For one graph with adjacency `A`, its normalisation `Â` and input `H`:
///
/// ```text
/// H_emb      = GCN(Â, H)
/// rep, y     = top ⌈kN⌉ rows of H_emb by score, and their scores
/// centroids  = rep with row i scaled by y_i
/// S          = softmax_rows(affinity(H_emb, centroids))
/// H', A'     = SᵀH, SᵀAS
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SpaPool {
    pub gcn: GcnLayer,
    pub selector: Selector,
    pub aggregator: Aggregator,
    pub aux: AuxLossKind,
}

impl SpaPool {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        ratio: f64,
        selector: SelectorKind,
        aggregator: AggregatorKind,
        aux: AuxLossKind,
        rng: &mut SeededRng,
    ) -> Self {
        let gcn = GcnLayer::init(
            store,
            &format!("{name}.gcn"),
            dim,
            dim,
            Activation::Relu,
            rng,
        );
        let selector = match selector {
            SelectorKind::TopK => Selector::TopK(TopKScorer::init(
                store,
                &format!("{name}.scorer"),
                dim,
                ratio,
                rng,
            )),
            SelectorKind::SagPool => Selector::SagPool {
                gcn: GcnLayer::init(
                    store,
                    &format!("{name}.score_gcn"),
                    dim,
                    1,
                    Activation::Identity,
                    rng,
                ),
                ratio,
            },
        };
        let aggregator = match aggregator {
            AggregatorKind::Cosine => Aggregator::Cosine,
            AggregatorKind::Scalar => Aggregator::Scalar,
            AggregatorKind::Attention => Aggregator::Attention(AttentionAggregator::init(
                store,
                &format!("{name}.attention"),
                dim,
                rng,
            )),
        };
        Self {
            gcn,
            selector,
            aggregator,
            aux,
        }
    }

    /// The assignment matrix `S` (N×⌈kN⌉) and the Top-K selection behind it.
    pub fn assign(
        &self,
        tape: &mut Tape,
        params: &Bound,
        a_norm: Tensor,
        h: Tensor,
    ) -> Result<(Tensor, TopKSelection), AutodiffError> {
        let h_emb = self.gcn.forward(tape, params, a_norm, h)?;
        let sel = self.selector.select(tape, params, a_norm, h_emb)?;
        let centroids = tape.scale_rows(sel.rep, sel.scores)?;
        let logits = self.aggregator.logits(tape, params, h_emb, centroids)?;
        Ok((tape.softmax_rows(logits), sel))
    }

    /// `a` is the raw pooled-graph adjacency (used by `SᵀAS` and the
    /// auxiliary loss), `a_norm` its GCN normalisation.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        a: Tensor,
        a_norm: Tensor,
        h: Tensor,
    ) -> Result<PoolOutput, AutodiffError> {
        let (s, sel) = self.assign(tape, params, a_norm, h)?;
        let features = reduce_embeddings(tape, s, h)?;
        let adjacency = connect_adjacency(tape, s, a)?;
        let aux = aux_loss(tape, self.aux, s, a)?;
        Ok(PoolOutput {
            adjacency,
            features,
            assignment: Some(s),
            selected: Some(sel.indices),
            aux,
        })
    }
}
