//! Dense 2-D tensors with tape-based reverse-mode differentiation.

mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{grad_check, grad_check_many, GradCheckReport, DEFAULT_STEP, RELATIVE_FLOOR};
pub use matrix::Matrix;
pub use tape::{Activation, BinaryKind, Reduction, Tape, Tensor, EPS};

pub(crate) use tape::normalize_adjacency_value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value produced by {op} (node {node})")]
    NonFinite { node: usize, op: &'static str },
}
