//! Node-to-centroid affinities fed to the assignment softmax.

use crate::autodiff::{AutodiffError, Tape, Tensor, EPS};
use crate::graph_io::SeededRng;
use crate::layers::{Bound, MlpBlock, ParamStore};

/// Width of the attention projections.
pub const ATTENTION_WIDTH: usize = 16;

/// Cosine similarity between every row of `h` and every centroid row.
pub fn affinity_cosine(
    tape: &mut Tape,
    h: Tensor,
    centroids: Tensor,
) -> Result<Tensor, AutodiffError> {
    let hn = tape.row_l2_normalize(h, EPS);
    let cn = tape.row_l2_normalize(centroids, EPS);
    let cnt = tape.transpose(cn);
    tape.matmul(hn, cnt)
}

/// Unnormalised scalar products `h·repᵀ`.
pub fn affinity_scalar(tape: &mut Tape, h: Tensor, rep: Tensor) -> Result<Tensor, AutodiffError> {
    let rt = tape.transpose(rep);
    tape.matmul(h, rt)
}

/// Scaled dot-product attention logits `(1/√α)·MLP_q(h)·MLP_k(rep)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionAggregator {
    pub query: MlpBlock,
    pub key: MlpBlock,
    pub width: usize,
}

impl AttentionAggregator {
    /// Query and key MLPs `F → α → α` with ReLU between.
    pub fn init(store: &mut ParamStore, name: &str, in_dim: usize, rng: &mut SeededRng) -> Self {
        let width = ATTENTION_WIDTH;
        Self {
            query: MlpBlock::init(
                store,
                &format!("{name}.query"),
                &[in_dim, width, width],
                rng,
            ),
            key: MlpBlock::init(store, &format!("{name}.key"), &[in_dim, width, width], rng),
            width,
        }
    }

    pub fn logits(
        &self,
        tape: &mut Tape,
        params: &Bound,
        h: Tensor,
        rep: Tensor,
    ) -> Result<Tensor, AutodiffError> {
        let q = self.query.forward(tape, params, h)?;
        let k = self.key.forward(tape, params, rep)?;
        for t in [q, k] {
            if tape.shape(t).1 != self.width {
                return Err(AutodiffError::Shape {
                    op: "attention",
                    lhs: tape.shape(t),
                    rhs: (tape.shape(t).0, self.width),
                });
            }
        }
        let kt = tape.transpose(k);
        let qk = tape.matmul(q, kt)?;
        Ok(tape.scale(qk, 1.0 / (self.width as f64).sqrt()))
    }
}
