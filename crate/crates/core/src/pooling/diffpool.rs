use crate::autodiff::{Activation, AutodiffError, Tape, Tensor};
use crate::graph_io::SeededRng;
use crate::layers::{Bound, GcnLayer, ParamStore};

use super::{aux_loss_diffpool, connect_adjacency, reduce_embeddings, PoolOutput};

/// Soft assignment to a fixed number of clusters:
/// `S = softmax(GCN_assign(Â, H))`, `Z = GCN_embed(Â, H)`, `H' = SᵀZ`,
/// `A' = SᵀAS`, with the link-prediction and entropy losses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffPool {
    pub assign: GcnLayer,
    pub embed: GcnLayer,
    pub clusters: usize,
}

impl DiffPool {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        clusters: usize,
        rng: &mut SeededRng,
    ) -> Self {
        assert!(clusters >= 1, "DiffPool needs at least one cluster");
        Self {
            assign: GcnLayer::init(
                store,
                &format!("{name}.assign"),
                dim,
                clusters,
                Activation::Identity,
                rng,
            ),
            embed: GcnLayer::init(
                store,
                &format!("{name}.embed"),
                dim,
                dim,
                Activation::Relu,
                rng,
            ),
            clusters,
        }
    }

    /// The fixed cluster count used when none is given: `⌈0.5 × mean N⌉`.
    pub fn default_clusters(mean_node_count: f64) -> usize {
        ((0.5 * mean_node_count).ceil() as usize).max(1)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        a: Tensor,
        a_norm: Tensor,
        h: Tensor,
    ) -> Result<PoolOutput, AutodiffError> {
        let logits = self.assign.forward(tape, params, a_norm, h)?;
        let s = tape.softmax_rows(logits);
        let z = self.embed.forward(tape, params, a_norm, h)?;
        let features = reduce_embeddings(tape, s, z)?;
        let adjacency = connect_adjacency(tape, s, a)?;
        let aux = aux_loss_diffpool(tape, s, a)?;
        Ok(PoolOutput {
            adjacency,
            features,
            assignment: Some(s),
            selected: None,
            aux: Some(aux),
        })
    }
}
