//! Reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node to the [`Tape`] holding its forward value
//! and enough information to replay its backward rule. Nodes are only ever
//! appended, so the node order is a topological order and [`Tape::backward`]
//! is a single reverse sweep.
//!
//! ```
//! use grapool_core::autodiff::{Matrix, Reduction, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::from_rows(&[[1.0, 2.0]]));
//! let n = tape.reduce(w, Reduction::FrobeniusNorm).unwrap();
//! let loss = tape.mul(n, n).unwrap();
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(w).unwrap().as_slice(), &[2.0, 4.0]);
//! ```

use super::{AutodiffError, Matrix};

/// Guard for norm and logarithm denominators.
pub const EPS: f64 = 1e-12;

/// Handle to a node recorded on a [`Tape`]. Handles from one tape are
/// meaningless on another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tensor(usize);

impl Tensor {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
    FrobeniusNorm,
    /// `(1/m) Σᵢ −Σⱼ xᵢⱼ ln(xᵢⱼ + ε)` over probability rows.
    RowEntropyMean,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Binary(BinaryKind, usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    AddRowBias(usize, usize),
    ScaleRows(usize, usize),
    Transpose(usize),
    Activation(Activation, usize),
    SoftmaxRows(usize),
    RowL2Normalize(usize, f64),
    Reduce(Reduction, usize),
    Trace(usize),
    ColSums(usize),
    MeanRows(usize),
    GatherRows(usize, Vec<usize>),
    SelectSquare(usize, Vec<usize>),
    NormalizeAdjacency(usize),
    CrossEntropy(usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    requires_grad: bool,
    grad: Option<Matrix>,
    op: Op,
}

/// Append-only record of a computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf: gradients are accumulated for it.
    pub fn param(&mut self, value: Matrix) -> Tensor {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Matrix) -> Tensor {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Tensor {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn value(&self, t: Tensor) -> &Matrix {
        &self.nodes[t.0].value
    }

    pub fn shape(&self, t: Tensor) -> (usize, usize) {
        self.nodes[t.0].value.shape()
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.nodes[t.0].requires_grad
    }

    /// Accumulated gradient of the last [`backward`](Self::backward) calls,
    /// `None` if the tensor does not require gradients or none has reached it.
    pub fn grad(&self, t: Tensor) -> Option<&Matrix> {
        self.nodes[t.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn ensure_finite(&self, t: Tensor) -> Result<(), AutodiffError> {
        if self.value(t).is_finite() {
            Ok(())
        } else {
            Err(AutodiffError::NonFinite {
                node: t.0,
                op: self.op_name(t.0),
            })
        }
    }

    fn op_name(&self, id: usize) -> &'static str {
        match &self.nodes[id].op {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Binary(..) => "elementwise",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::AddRowBias(..) => "add_row_bias",
            Op::ScaleRows(..) => "scale_rows",
            Op::Transpose(..) => "transpose",
            Op::Activation(..) => "activation",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::RowL2Normalize(..) => "row_l2_normalize",
            Op::Reduce(..) => "reduce",
            Op::Trace(..) => "trace",
            Op::ColSums(..) => "col_sums",
            Op::MeanRows(..) => "mean_rows",
            Op::GatherRows(..) => "gather_rows",
            Op::SelectSquare(..) => "select_square",
            Op::NormalizeAdjacency(..) => "normalize_adjacency",
            Op::CrossEntropy(..) => "cross_entropy",
        }
    }

    fn push(&mut self, value: Matrix, requires_grad: bool, op: Op) -> Tensor {
        self.nodes.push(Node {
            value,
            requires_grad,
            grad: None,
            op,
        });
        Tensor(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, AutodiffError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(value, rg, Op::MatMul(a.0, b.0)))
    }

    /// Pointwise `a ∘ b`; `b` may be 1×1, in which case it is broadcast.
    pub fn elementwise(
        &mut self,
        a: Tensor,
        b: Tensor,
        kind: BinaryKind,
    ) -> Result<Tensor, AutodiffError> {
        let (va, vb) = (self.value(a), self.value(b));
        let value = if va.shape() == vb.shape() {
            match kind {
                BinaryKind::Add => va.zip_map(vb, |x, y| x + y),
                BinaryKind::Sub => va.zip_map(vb, |x, y| x - y),
                BinaryKind::Mul => va.zip_map(vb, |x, y| x * y),
                BinaryKind::Div => va.zip_map(vb, |x, y| x / y),
            }
        } else if vb.shape() == (1, 1) {
            let s = vb.item();
            match kind {
                BinaryKind::Add => va.map(|x| x + s),
                BinaryKind::Sub => va.map(|x| x - s),
                BinaryKind::Mul => va.map(|x| x * s),
                BinaryKind::Div => va.map(|x| x / s),
            }
        } else {
            return Err(AutodiffError::Shape {
                op: "elementwise",
                lhs: va.shape(),
                rhs: vb.shape(),
            });
        };
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(value, rg, Op::Binary(kind, a.0, b.0)))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, AutodiffError> {
        self.elementwise(a, b, BinaryKind::Add)
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, AutodiffError> {
        self.elementwise(a, b, BinaryKind::Sub)
    }

    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, AutodiffError> {
        self.elementwise(a, b, BinaryKind::Mul)
    }

    pub fn div(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, AutodiffError> {
        self.elementwise(a, b, BinaryKind::Div)
    }

    pub fn scale(&mut self, a: Tensor, factor: f64) -> Tensor {
        let value = self.value(a).map(|x| x * factor);
        let rg = self.rg(&[a.0]);
        self.push(value, rg, Op::Scale(a.0, factor))
    }

    pub fn add_scalar(&mut self, a: Tensor, offset: f64) -> Tensor {
        let value = self.value(a).map(|x| x + offset);
        let rg = self.rg(&[a.0]);
        self.push(value, rg, Op::AddScalar(a.0))
    }

    /// `x + 1·b` for an m×n `x` and a 1×n bias row.
    pub fn add_row_bias(&mut self, x: Tensor, bias: Tensor) -> Result<Tensor, AutodiffError> {
        let (vx, vb) = (self.value(x), self.value(bias));
        if vb.rows() != 1 || vb.cols() != vx.cols() {
            return Err(AutodiffError::Shape {
                op: "add_row_bias",
                lhs: vx.shape(),
                rhs: vb.shape(),
            });
        }
        let mut value = vx.clone();
        for i in 0..value.rows() {
            for (o, &b) in value.row_mut(i).iter_mut().zip(vb.as_slice()) {
                *o += b;
            }
        }
        let rg = self.rg(&[x.0, bias.0]);
        Ok(self.push(value, rg, Op::AddRowBias(x.0, bias.0)))
    }

    /// Multiplies row `i` of the m×n `x` by entry `i` of the m×1 `s`.
    pub fn scale_rows(&mut self, x: Tensor, s: Tensor) -> Result<Tensor, AutodiffError> {
        let (vx, vs) = (self.value(x), self.value(s));
        if vs.cols() != 1 || vs.rows() != vx.rows() {
            return Err(AutodiffError::Shape {
                op: "scale_rows",
                lhs: vx.shape(),
                rhs: vs.shape(),
            });
        }
        let mut value = vx.clone();
        for i in 0..value.rows() {
            let f = vs[(i, 0)];
            value.row_mut(i).iter_mut().for_each(|v| *v *= f);
        }
        let rg = self.rg(&[x.0, s.0]);
        Ok(self.push(value, rg, Op::ScaleRows(x.0, s.0)))
    }

    pub fn transpose(&mut self, a: Tensor) -> Tensor {
        let value = self.value(a).transpose();
        let rg = self.rg(&[a.0]);
        self.push(value, rg, Op::Transpose(a.0))
    }

    pub fn activation(&mut self, a: Tensor, kind: Activation) -> Tensor {
        if kind == Activation::Identity {
            return a;
        }
        let value = match kind {
            Activation::Relu => self.value(a).map(|x| x.max(0.0)),
            Activation::Tanh => self.value(a).map(f64::tanh),
            Activation::Identity => unreachable!(),
        };
        let rg = self.rg(&[a.0]);
        self.push(value, rg, Op::Activation(kind, a.0))
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        self.activation(a, Activation::Relu)
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        self.activation(a, Activation::Tanh)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Tensor) -> Tensor {
        let mut value = self.value(a).clone();
        for i in 0..value.rows() {
            softmax_in_place(value.row_mut(i));
        }
        let rg = self.rg(&[a.0]);
        self.push(value, rg, Op::SoftmaxRows(a.0))
    }

    /// Divides each row by `max(eps, ‖row‖₂)`; zero rows stay zero.
    pub fn row_l2_normalize(&mut self, a: Tensor, eps: f64) -> Tensor {
        let mut value = self.value(a).clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let n = row_norm(row).max(eps);
            row.iter_mut().for_each(|v| *v /= n);
        }
        let rg = self.rg(&[a.0]);
        self.push(value, rg, Op::RowL2Normalize(a.0, eps))
    }

    pub fn reduce(&mut self, a: Tensor, kind: Reduction) -> Result<Tensor, AutodiffError> {
        let v = self.value(a);
        let out = match kind {
            Reduction::Sum => v.sum(),
            Reduction::Mean => {
                if v.is_empty() {
                    return Err(AutodiffError::Contract("mean of an empty tensor".into()));
                }
                v.sum() / v.len() as f64
            }
            Reduction::FrobeniusNorm => v.frobenius_norm(),
            Reduction::RowEntropyMean => {
                check_row_stochastic(v)?;
                let total: f64 = v.as_slice().iter().map(|&x| -x * (x + EPS).ln()).sum();
                total / v.rows() as f64
            }
        };
        let rg = self.rg(&[a.0]);
        Ok(self.push(Matrix::scalar(out), rg, Op::Reduce(kind, a.0)))
    }

    pub fn sum(&mut self, a: Tensor) -> Tensor {
        self.reduce(a, Reduction::Sum).expect("sum is total")
    }

    pub fn frobenius_norm(&mut self, a: Tensor) -> Tensor {
        self.reduce(a, Reduction::FrobeniusNorm)
            .expect("frobenius norm is total")
    }

    pub fn trace(&mut self, a: Tensor) -> Result<Tensor, AutodiffError> {
        let v = self.value(a);
        if v.rows() != v.cols() {
            return Err(AutodiffError::Shape {
                op: "trace",
                lhs: v.shape(),
                rhs: v.shape(),
            });
        }
        let t = (0..v.rows()).map(|i| v[(i, i)]).sum();
        let rg = self.rg(&[a.0]);
        Ok(self.push(Matrix::scalar(t), rg, Op::Trace(a.0)))
    }

    /// Column sums as a 1×n row, i.e. `1ᵀ·x`.
    pub fn col_sums(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a);
        let value = Matrix::from_vec(1, v.cols(), v.col_sums()).expect("shape");
        let rg = self.rg(&[a.0]);
        self.push(value, rg, Op::ColSums(a.0))
    }

    /// Column-wise mean as a 1×n row.
    pub fn mean_rows(&mut self, a: Tensor) -> Result<Tensor, AutodiffError> {
        let v = self.value(a);
        if v.rows() == 0 {
            return Err(AutodiffError::Contract("mean over zero rows".into()));
        }
        let m = v.rows() as f64;
        let value = Matrix::from_vec(
            1,
            v.cols(),
            v.col_sums().into_iter().map(|s| s / m).collect(),
        )
        .expect("shape");
        let rg = self.rg(&[a.0]);
        Ok(self.push(value, rg, Op::MeanRows(a.0)))
    }

    pub fn gather_rows(&mut self, a: Tensor, indices: &[usize]) -> Result<Tensor, AutodiffError> {
        let v = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= v.rows()) {
            return Err(AutodiffError::Contract(format!(
                "row index {bad} out of range for {} rows",
                v.rows()
            )));
        }
        let value = v.select_rows(indices);
        let rg = self.rg(&[a.0]);
        Ok(self.push(value, rg, Op::GatherRows(a.0, indices.to_vec())))
    }

    /// `a[indices, indices]` of a square tensor.
    pub fn select_square(&mut self, a: Tensor, indices: &[usize]) -> Result<Tensor, AutodiffError> {
        let v = self.value(a);
        if v.rows() != v.cols() {
            return Err(AutodiffError::Shape {
                op: "select_square",
                lhs: v.shape(),
                rhs: v.shape(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= v.rows()) {
            return Err(AutodiffError::Contract(format!(
                "index {bad} out of range for {} rows",
                v.rows()
            )));
        }
        let value = v.select_square(indices);
        let rg = self.rg(&[a.0]);
        Ok(self.push(value, rg, Op::SelectSquare(a.0, indices.to_vec())))
    }

    /// `D̃^(−1/2)·(A + I)·D̃^(−1/2)` with `D̃ᵢᵢ = Σⱼ (A + I)ᵢⱼ`.
    pub fn normalize_adjacency(&mut self, a: Tensor) -> Result<Tensor, AutodiffError> {
        let v = self.value(a);
        if v.rows() != v.cols() {
            return Err(AutodiffError::Shape {
                op: "normalize_adjacency",
                lhs: v.shape(),
                rhs: v.shape(),
            });
        }
        let value = normalize_adjacency_value(v);
        let rg = self.rg(&[a.0]);
        Ok(self.push(value, rg, Op::NormalizeAdjacency(a.0)))
    }

    /// `−ln softmax(logits)[label]` for a 1×C row of logits, via log-sum-exp.
    pub fn cross_entropy(&mut self, logits: Tensor, label: usize) -> Result<Tensor, AutodiffError> {
        let v = self.value(logits);
        if v.rows() != 1 {
            return Err(AutodiffError::Shape {
                op: "cross_entropy",
                lhs: v.shape(),
                rhs: (1, v.cols()),
            });
        }
        if label >= v.cols() {
            return Err(AutodiffError::Contract(format!(
                "label {label} out of range for {} classes",
                v.cols()
            )));
        }
        let x = v.as_slice();
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + x.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        let loss = lse - x[label];
        let rg = self.rg(&[logits.0]);
        Ok(self.push(Matrix::scalar(loss), rg, Op::CrossEntropy(logits.0, label)))
    }

    /// Reverse sweep from a 1×1 `loss`. Gradients are added to whatever
    /// earlier calls left behind; call [`zero_grad`](Self::zero_grad) to reset.
    pub fn backward(&mut self, loss: Tensor) -> Result<(), AutodiffError> {
        if self.shape(loss) != (1, 1) {
            return Err(AutodiffError::Contract(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Matrix::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            self.propagate(id, &g, &mut adj);
            match &mut self.nodes[id].grad {
                Some(acc) => acc.axpy(1.0, &g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Matrix, adj: &mut [Option<Matrix>]) {
        let node = &self.nodes[id];
        let out = &node.value;
        let nodes = &self.nodes;
        let mut send = |target: usize, contrib: Matrix| {
            if !nodes[target].requires_grad {
                return;
            }
            match &mut adj[target] {
                Some(acc) => acc.axpy(1.0, &contrib),
                slot @ None => *slot = Some(contrib),
            }
        };
        let wants = |target: usize| nodes[target].requires_grad;
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if wants(a) {
                    send(a, g.matmul_t(&nodes[b].value).expect("shape"));
                }
                if wants(b) {
                    send(b, nodes[a].value.t_matmul(g).expect("shape"));
                }
            }
            &Op::Binary(kind, a, b) => {
                let (va, vb) = (&nodes[a].value, &nodes[b].value);
                let broadcast = va.shape() != vb.shape();
                let bval = |i: usize| {
                    if broadcast {
                        vb.as_slice()[0]
                    } else {
                        vb.as_slice()[i]
                    }
                };
                if wants(a) {
                    let ga = match kind {
                        BinaryKind::Add | BinaryKind::Sub => g.clone(),
                        BinaryKind::Mul => Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                            g[(i, j)] * bval(i * g.cols() + j)
                        }),
                        BinaryKind::Div => Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                            g[(i, j)] / bval(i * g.cols() + j)
                        }),
                    };
                    send(a, ga);
                }
                if wants(b) {
                    let gb_full = match kind {
                        BinaryKind::Add => g.clone(),
                        BinaryKind::Sub => g.map(|x| -x),
                        BinaryKind::Mul => g.zip_map(va, |x, y| x * y),
                        BinaryKind::Div => Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                            let k = i * g.cols() + j;
                            let d = bval(k);
                            -g[(i, j)] * va.as_slice()[k] / (d * d)
                        }),
                    };
                    if broadcast {
                        send(b, Matrix::scalar(gb_full.sum()));
                    } else {
                        send(b, gb_full);
                    }
                }
            }
            &Op::Scale(a, f) => send(a, g.map(|x| x * f)),
            &Op::AddScalar(a) => send(a, g.clone()),
            &Op::AddRowBias(x, b) => {
                if wants(x) {
                    send(x, g.clone());
                }
                if wants(b) {
                    send(
                        b,
                        Matrix::from_vec(1, g.cols(), g.col_sums()).expect("shape"),
                    );
                }
            }
            &Op::ScaleRows(x, s) => {
                let (vx, vs) = (&nodes[x].value, &nodes[s].value);
                if wants(x) {
                    send(
                        x,
                        Matrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * vs[(i, 0)]),
                    );
                }
                if wants(s) {
                    send(
                        s,
                        Matrix::from_fn(g.rows(), 1, |i, _| {
                            g.row(i).iter().zip(vx.row(i)).map(|(a, b)| a * b).sum()
                        }),
                    );
                }
            }
            &Op::Transpose(a) => send(a, g.transpose()),
            &Op::Activation(kind, a) => {
                let ga = match kind {
                    Activation::Relu => {
                        g.zip_map(&nodes[a].value, |gv, x| if x > 0.0 { gv } else { 0.0 })
                    }
                    Activation::Tanh => g.zip_map(out, |gv, y| gv * (1.0 - y * y)),
                    Activation::Identity => g.clone(),
                };
                send(a, ga);
            }
            &Op::SoftmaxRows(a) => {
                let mut ga = Matrix::zeros(g.rows(), g.cols());
                for i in 0..g.rows() {
                    let (gr, yr) = (g.row(i), out.row(i));
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for (o, (&gv, &y)) in ga.row_mut(i).iter_mut().zip(gr.iter().zip(yr)) {
                        *o = y * (gv - dot);
                    }
                }
                send(a, ga);
            }
            &Op::RowL2Normalize(a, eps) => {
                let va = &nodes[a].value;
                let mut ga = Matrix::zeros(g.rows(), g.cols());
                for i in 0..g.rows() {
                    let norm = row_norm(va.row(i));
                    let (gr, yr) = (g.row(i), out.row(i));
                    if norm > eps {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for (o, (&gv, &y)) in ga.row_mut(i).iter_mut().zip(gr.iter().zip(yr)) {
                            *o = (gv - y * dot) / norm;
                        }
                    } else {
                        for (o, &gv) in ga.row_mut(i).iter_mut().zip(gr) {
                            *o = gv / eps;
                        }
                    }
                }
                send(a, ga);
            }
            &Op::Reduce(kind, a) => {
                let va = &nodes[a].value;
                let s = g.item();
                let ga = match kind {
                    Reduction::Sum => Matrix::filled(va.rows(), va.cols(), s),
                    Reduction::Mean => Matrix::filled(va.rows(), va.cols(), s / va.len() as f64),
                    Reduction::FrobeniusNorm => {
                        let n = out.item().max(EPS);
                        va.map(|x| s * x / n)
                    }
                    Reduction::RowEntropyMean => {
                        let m = va.rows() as f64;
                        va.map(|x| -s * ((x + EPS).ln() + x / (x + EPS)) / m)
                    }
                };
                send(a, ga);
            }
            &Op::Trace(a) => {
                let n = nodes[a].value.rows();
                let mut ga = Matrix::zeros(n, n);
                for i in 0..n {
                    ga[(i, i)] = g.item();
                }
                send(a, ga);
            }
            &Op::ColSums(a) => {
                let rows = nodes[a].value.rows();
                send(a, Matrix::from_fn(rows, g.cols(), |_, j| g[(0, j)]));
            }
            &Op::MeanRows(a) => {
                let rows = nodes[a].value.rows();
                let m = rows as f64;
                send(a, Matrix::from_fn(rows, g.cols(), |_, j| g[(0, j)] / m));
            }
            Op::GatherRows(a, idx) => {
                let va = &nodes[*a].value;
                let mut ga = Matrix::zeros(va.rows(), va.cols());
                for (r, &i) in idx.iter().enumerate() {
                    for (o, &gv) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += gv;
                    }
                }
                send(*a, ga);
            }
            Op::SelectSquare(a, idx) => {
                let va = &nodes[*a].value;
                let mut ga = Matrix::zeros(va.rows(), va.cols());
                for (r, &i) in idx.iter().enumerate() {
                    for (c, &j) in idx.iter().enumerate() {
                        ga[(i, j)] += g[(r, c)];
                    }
                }
                send(*a, ga);
            }
            &Op::NormalizeAdjacency(a) => {
                let va = &nodes[a].value;
                let n = va.rows();
                let deg: Vec<f64> = (0..n)
                    .map(|i| va.row(i).iter().sum::<f64>() + 1.0)
                    .collect();
                // out = Ã_ij / sqrt(d_i d_j); d_i depends on row i of Ã.
                let mut dd = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let t = g[(i, j)] * out[(i, j)];
                        dd[i] += t;
                        dd[j] += t;
                    }
                }
                for (i, v) in dd.iter_mut().enumerate() {
                    *v *= -0.5 / deg[i];
                }
                let ga = Matrix::from_fn(n, n, |i, j| g[(i, j)] / (deg[i] * deg[j]).sqrt() + dd[i]);
                send(a, ga);
            }
            &Op::CrossEntropy(a, label) => {
                let mut p = nodes[a].value.as_slice().to_vec();
                softmax_in_place(&mut p);
                let coef = -g.item();
                let ga: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(j, &pj)| coef * (if j == label { 1.0 } else { 0.0 } - pj))
                    .collect();
                send(a, Matrix::from_vec(1, ga.len(), ga).expect("shape"));
            }
        }
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_row_stochastic(v: &Matrix) -> Result<(), AutodiffError> {
    for i in 0..v.rows() {
        let row = v.row(i);
        let s: f64 = row.iter().sum();
        if row.iter().any(|&x| x < 0.0) || (s - 1.0).abs() > 1e-6 {
            return Err(AutodiffError::Contract(format!(
                "row {i} is not a probability vector (sum {s})"
            )));
        }
    }
    Ok(())
}

pub(crate) fn normalize_adjacency_value(a: &Matrix) -> Matrix {
    let n = a.rows();
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum::<f64>() + 1.0).collect();
    Matrix::from_fn(n, n, |i, j| {
        let self_loop = if i == j { 1.0 } else { 0.0 };
        (a[(i, j)] + self_loop) / (deg[i] * deg[j]).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn elementwise_identities() {
        let mut tape = Tape::new();
        let m = tape.constant(Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]));
        let zero = tape.constant(Matrix::scalar(0.0));
        let ones = tape.constant(Matrix::ones(2, 2));
        let s = tape.add(m, zero).unwrap();
        let p = tape.mul(m, ones).unwrap();
        assert_eq!(tape.value(s), tape.value(m));
        assert_eq!(tape.value(p), tape.value(m));
        let bad = tape.constant(Matrix::ones(3, 2));
        assert!(tape.add(m, bad).is_err());
    }

    #[test]
    fn relu_and_tanh_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&[[-1.0, 2.0]]));
        let r = tape.relu(x);
        assert_eq!(tape.value(r).as_slice(), &[0.0, 2.0]);
        let z = tape.constant(Matrix::scalar(0.0));
        let t = tape.tanh(z);
        assert_eq!(tape.value(t).item(), 0.0);
    }

    #[test]
    fn softmax_rows_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&[[0.0, 0.0]]));
        let y = tape.softmax_rows(x);
        assert_eq!(tape.value(y).as_slice(), &[0.5, 0.5]);
        let single = tape.constant(Matrix::from_rows(&[[-37.0], [1e3]]));
        let y = tape.softmax_rows(single);
        assert_eq!(tape.value(y).as_slice(), &[1.0, 1.0]);
        let x = tape.constant(Matrix::from_rows(&[[1f64.ln(), 3f64.ln()]]));
        let y = tape.softmax_rows(x);
        assert!(close(tape.value(y)[(0, 0)], 0.25, 1e-15));
        assert!(close(tape.value(y)[(0, 1)], 0.75, 1e-15));
    }

    #[test]
    fn row_l2_normalize_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&[[3.0, 4.0], [0.0, 0.0], [0.6, 0.8]]));
        let y = tape.row_l2_normalize(x, EPS);
        let v = tape.value(y);
        assert!(close(v[(0, 0)], 0.6, 1e-15) && close(v[(0, 1)], 0.8, 1e-15));
        assert_eq!(v.row(1), &[0.0, 0.0]);
        assert!(close(v[(2, 0)], 0.6, 1e-15) && close(v[(2, 1)], 0.8, 1e-15));
    }

    #[test]
    fn reductions_examples() {
        let mut tape = Tape::new();
        let i2 = tape.constant(Matrix::identity(2));
        let f = tape.frobenius_norm(i2);
        assert!(close(tape.value(f).item(), 2f64.sqrt(), 1e-15));
        let e = tape.reduce(i2, Reduction::RowEntropyMean).unwrap();
        assert!(close(tape.value(e).item(), 0.0, 1e-11));
        let u = tape.constant(Matrix::filled(3, 2, 0.5));
        let e = tape.reduce(u, Reduction::RowEntropyMean).unwrap();
        assert!(close(tape.value(e).item(), 2f64.ln(), 1e-11));
        let bad = tape.constant(Matrix::from_rows(&[[0.7, 0.7]]));
        assert!(matches!(
            tape.reduce(bad, Reduction::RowEntropyMean),
            Err(AutodiffError::Contract(_))
        ));
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let w = tape.param(Matrix::from_rows(&[[1.0, -4.0], [2.5, 0.0]]));
        let s = tape.sum(w);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(w).unwrap(), &Matrix::ones(2, 2));
    }

    #[test]
    fn squared_frobenius_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(Matrix::from_rows(&[[1.0, 2.0]]));
        let n = tape.frobenius_norm(w);
        let sq = tape.mul(n, n).unwrap();
        tape.backward(sq).unwrap();
        let g = tape.grad(w).unwrap();
        assert!(close(g[(0, 0)], 2.0, 1e-12) && close(g[(0, 1)], 4.0, 1e-12));
    }

    #[test]
    fn repeated_backward_accumulates_until_zeroed() {
        let mut tape = Tape::new();
        let w = tape.param(Matrix::from_rows(&[[1.0, 2.0]]));
        let s = tape.sum(w);
        tape.backward(s).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(w).unwrap().as_slice(), &[2.0, 2.0]);
        tape.zero_grad();
        assert!(tape.grad(w).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let w = tape.param(Matrix::ones(2, 2));
        assert!(matches!(tape.backward(w), Err(AutodiffError::Contract(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Matrix::ones(2, 2));
        let w = tape.param(Matrix::ones(2, 2));
        let p = tape.matmul(c, w).unwrap();
        let s = tape.sum(p);
        tape.backward(s).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(w).unwrap(), &Matrix::filled(2, 2, 2.0));
    }

    #[test]
    fn normalize_adjacency_examples() {
        let path = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(normalize_adjacency_value(&path), Matrix::filled(2, 2, 0.5));
        assert_eq!(
            normalize_adjacency_value(&Matrix::zeros(1, 1)),
            Matrix::scalar(1.0)
        );
    }

    #[test]
    fn cross_entropy_values() {
        let mut tape = Tape::new();
        let l = tape.constant(Matrix::from_rows(&[[0.3, 0.3]]));
        let ce = tape.cross_entropy(l, 1).unwrap();
        assert!(close(tape.value(ce).item(), 2f64.ln(), 1e-11));
        let sure = tape.constant(Matrix::from_rows(&[[800.0, 0.0]]));
        let ce = tape.cross_entropy(sure, 0).unwrap();
        assert!(tape.value(ce).item().abs() < 1e-11);
        assert!(tape.cross_entropy(sure, 2).is_err());
    }
}
