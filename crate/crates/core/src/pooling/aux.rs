//! Unsupervised regularisers on an assignment matrix `S` (N×C).
//!
//! All three take the raw adjacency of the pooled graph (0/1 or weighted,
//! no self-loops) and are computed per graph; batch reduction is a plain
//! mean over graphs, done by the caller. The supernode count `C` is read off
//! `S`, so adaptive operators get the per-graph `k_i` for free.

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, Matrix, Reduction, Tape, Tensor};

/// Named scalar loss terms recorded on a tape, plus their sum.
#[derive(Debug, Clone)]
pub struct AuxLoss {
    pub terms: Vec<(&'static str, Tensor)>,
    pub total: Tensor,
}

impl AuxLoss {
    fn from_terms(
        tape: &mut Tape,
        terms: Vec<(&'static str, Tensor)>,
    ) -> Result<Self, AutodiffError> {
        let mut total = terms[0].1;
        for &(_, t) in &terms[1..] {
            total = tape.add(total, t)?;
        }
        Ok(Self { terms, total })
    }

    pub fn report(&self, tape: &Tape) -> AuxLossReport {
        AuxLossReport {
            terms: self
                .terms
                .iter()
                .map(|&(name, t)| (name.to_string(), tape.value(t).item()))
                .collect(),
            total: tape.value(self.total).item(),
        }
    }
}

/// Plain values of an [`AuxLoss`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxLossReport {
    pub terms: Vec<(String, f64)>,
    pub total: f64,
}

impl AuxLossReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

fn check_shapes(
    tape: &Tape,
    s: Tensor,
    a: Tensor,
    op: &'static str,
) -> Result<(usize, usize), AutodiffError> {
    let (n, c) = tape.shape(s);
    if tape.shape(a) != (n, n) {
        return Err(AutodiffError::Shape {
            op,
            lhs: tape.shape(s),
            rhs: tape.shape(a),
        });
    }
    Ok((n, c))
}

/// Link-prediction loss `‖A − S·Sᵀ‖_F` and mean row entropy of `S`.
pub fn aux_loss_diffpool(tape: &mut Tape, s: Tensor, a: Tensor) -> Result<AuxLoss, AutodiffError> {
    check_shapes(tape, s, a, "aux_loss_diffpool")?;
    let st = tape.transpose(s);
    let sst = tape.matmul(s, st)?;
    let diff = tape.sub(a, sst)?;
    let link = tape.frobenius_norm(diff);
    let entropy = tape.reduce(s, Reduction::RowEntropyMean)?;
    AuxLoss::from_terms(tape, vec![("link_prediction", link), ("entropy", entropy)])
}

/// Cut term `−Tr(SᵀÃS)/Tr(SᵀD̃S)` and orthogonality term
/// `‖SᵀS/‖SᵀS‖_F − I_C/√C‖_F`, with `Ã = A + I` and `D̃` its degree matrix.
pub fn aux_loss_mincut(tape: &mut Tape, s: Tensor, a: Tensor) -> Result<AuxLoss, AutodiffError> {
    let (n, c) = check_shapes(tape, s, a, "aux_loss_mincut")?;
    let a_val = tape.value(a);
    let a_tilde = Matrix::from_fn(n, n, |i, j| a_val[(i, j)] + if i == j { 1.0 } else { 0.0 });
    let degrees = a_tilde.row_sums();
    let d_tilde = Matrix::from_fn(n, n, |i, j| if i == j { degrees[i] } else { 0.0 });

    // Ã is built from A's values, so the cut term only differentiates
    // through S; A is a constant input for every caller.
    let a_tilde = tape.constant(a_tilde);
    let d_tilde = tape.constant(d_tilde);
    let st = tape.transpose(s);
    let as_ = tape.matmul(a_tilde, s)?;
    let num_m = tape.matmul(st, as_)?;
    let num = tape.trace(num_m)?;
    let ds = tape.matmul(d_tilde, s)?;
    let den_m = tape.matmul(st, ds)?;
    let den = tape.trace(den_m)?;
    let ratio = tape.div(num, den)?;
    let cut = tape.scale(ratio, -1.0);

    let sts = tape.matmul(st, s)?;
    let sts_norm = tape.frobenius_norm(sts);
    let normalized = tape.div(sts, sts_norm)?;
    let target = tape.constant(Matrix::identity(c).map(|v| v / (c as f64).sqrt()));
    let gap = tape.sub(normalized, target)?;
    let ortho = tape.frobenius_norm(gap);
    AuxLoss::from_terms(tape, vec![("cut", cut), ("orthogonality", ortho)])
}

/// Modularity term `−Tr(SᵀBS)/(2|E|)` with `B = A − d·dᵀ/(2|E|)`, and
/// collapse regulariser `(√C/N)·‖Σᵢ Sᵢ‖_F − 1`. The modularity term is 0 for
/// graphs without edges.
pub fn aux_loss_dmon(tape: &mut Tape, s: Tensor, a: Tensor) -> Result<AuxLoss, AutodiffError> {
    let (n, c) = check_shapes(tape, s, a, "aux_loss_dmon")?;
    let a_val = tape.value(a);
    let two_m = a_val.sum();
    let modularity = if two_m > 0.0 {
        let b = modularity_matrix(a_val);
        let b = tape.constant(b);
        let st = tape.transpose(s);
        let bs = tape.matmul(b, s)?;
        let m = tape.matmul(st, bs)?;
        let tr = tape.trace(m)?;
        tape.scale(tr, -1.0 / two_m)
    } else {
        tape.constant(Matrix::scalar(0.0))
    };
    let col = tape.col_sums(s);
    let col_norm = tape.frobenius_norm(col);
    let scaled = tape.scale(col_norm, (c as f64).sqrt() / n as f64);
    let collapse = tape.add_scalar(scaled, -1.0);
    AuxLoss::from_terms(
        tape,
        vec![("modularity", modularity), ("collapse", collapse)],
    )
}

/// `B = A − d·dᵀ/(2|E|)` with `d` the (weighted) degree vector. `2|E|` is
/// the total adjacency mass; callers must check it is positive.
pub fn modularity_matrix(a: &Matrix) -> Matrix {
    let d = a.row_sums();
    let two_m = a.sum();
    Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] - d[i] * d[j] / two_m)
}
