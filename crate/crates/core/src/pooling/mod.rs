//! Hierarchical pooling operators and their auxiliary losses.
//!
//! Every operator maps `(A, H)` for one graph to a smaller `(A', H')`:
//!
//! * [`SpaPool`]: Top-K picks `⌈kN⌉` representative nodes, every node is
//!   soft-assigned to them through a softmax over affinities, and the graph
//!   is coarsened with `H' = SᵀH`, `A' = SᵀAS`.
//! * [`TopKPool`] / [`SagPool`]: keep the `⌈kN⌉` best-scoring nodes, gate
//!   them by `tanh(score)` and slice the adjacency.
//! * [`DiffPool`]: softmax assignment to a fixed number of clusters.

mod affinity;
mod aux;
mod diffpool;
mod select;
mod spapool;
mod sparse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Tape, Tensor};

pub use affinity::{affinity_cosine, affinity_scalar, AttentionAggregator, ATTENTION_WIDTH};
pub use aux::{
    aux_loss_diffpool, aux_loss_dmon, aux_loss_mincut, modularity_matrix, AuxLoss, AuxLossReport,
};
pub use diffpool::DiffPool;
pub use select::{
    select_top, supernode_count, top_indices, topk_select, TopKScorer, TopKSelection,
};
pub use spapool::{Aggregator, Selector, SpaPool};
pub use sparse::{SagPool, TopKPool};

/// `H' = Sᵀ·H`.
pub fn reduce_embeddings(tape: &mut Tape, s: Tensor, h: Tensor) -> Result<Tensor, AutodiffError> {
    if tape.shape(s).0 != tape.shape(h).0 {
        return Err(AutodiffError::Shape {
            op: "reduce_embeddings",
            lhs: tape.shape(s),
            rhs: tape.shape(h),
        });
    }
    let st = tape.transpose(s);
    tape.matmul(st, h)
}

/// `A' = Sᵀ·A·S`.
pub fn connect_adjacency(tape: &mut Tape, s: Tensor, a: Tensor) -> Result<Tensor, AutodiffError> {
    let n = tape.shape(s).0;
    if tape.shape(a) != (n, n) {
        return Err(AutodiffError::Shape {
            op: "connect_adjacency",
            lhs: tape.shape(s),
            rhs: tape.shape(a),
        });
    }
    let st = tape.transpose(s);
    let as_ = tape.matmul(a, s)?;
    tape.matmul(st, as_)
}

/// Output of one pooling layer for one graph.
#[derive(Debug, Clone)]
pub struct PoolOutput {
    /// Pooled adjacency, not normalised.
    pub adjacency: Tensor,
    pub features: Tensor,
    /// Soft assignment `S` (N×C) for dense operators.
    pub assignment: Option<Tensor>,
    /// Kept node indices for sparse operators, or the Top-K representatives
    /// for SpaPool.
    pub selected: Option<Vec<usize>>,
    pub aux: Option<AuxLoss>,
}

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        concat!("unknown ", stringify!($name), " {:?}; expected one of {}"),
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

named_enum!(PoolingKind {
    SpaPool => "spapool",
    TopK => "topk",
    SagPool => "sagpool",
    DiffPool => "diffpool",
});

named_enum!(
    /// Node-to-centroid affinity inside SpaPool.
    AggregatorKind {
        Cosine => "cosine",
        Scalar => "scalar",
        Attention => "attention",
    }
);

named_enum!(AuxLossKind {
    DiffPool => "diffpool",
    MinCut => "mincut",
    Dmon => "dmon",
    None => "none",
});

named_enum!(
    /// How SpaPool scores nodes before picking representatives.
    SelectorKind {
        TopK => "topk",
        SagPool => "sagpool",
    }
);

/// The auxiliary loss of `kind` on one graph, `None` for [`AuxLossKind::None`].
pub fn aux_loss(
    tape: &mut Tape,
    kind: AuxLossKind,
    s: Tensor,
    a: Tensor,
) -> Result<Option<AuxLoss>, AutodiffError> {
    Ok(match kind {
        AuxLossKind::DiffPool => Some(aux_loss_diffpool(tape, s, a)?),
        AuxLossKind::MinCut => Some(aux_loss_mincut(tape, s, a)?),
        AuxLossKind::Dmon => Some(aux_loss_dmon(tape, s, a)?),
        AuxLossKind::None => None,
    })
}
