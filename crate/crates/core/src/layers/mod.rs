//! Building blocks of the backbone: GCN propagation, MLP blocks and the
//! mean readout.

mod params;

pub use params::{glorot_uniform, Bound, ParamId, ParamStore};

use crate::autodiff::{normalize_adjacency_value, Activation, AutodiffError, Matrix, Tape, Tensor};
use crate::graph_io::SeededRng;

/// `D̃^(−1/2)·(A + I)·D̃^(−1/2)` on plain values.
pub fn normalize_adjacency(a: &Matrix) -> Matrix {
    normalize_adjacency_value(a)
}

/// `σ(Â·H·W)` for a normalised adjacency `Â`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            glorot_uniform(fan_in, fan_out, rng),
        );
        Self { weight, activation }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        a_norm: Tensor,
        h: Tensor,
    ) -> Result<Tensor, AutodiffError> {
        let (n, _) = tape.shape(h);
        if tape.shape(a_norm) != (n, n) {
            return Err(AutodiffError::Shape {
                op: "gcn_forward",
                lhs: tape.shape(a_norm),
                rhs: tape.shape(h),
            });
        }
        // (Â·H)·W: H has at most as many columns as W has outputs here, and
        // the order does not change the result.
        let hw = tape.matmul(h, params.get(self.weight))?;
        let z = tape.matmul(a_norm, hw)?;
        Ok(tape.activation(z, self.activation))
    }
}

/// Affine map `x·W + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let weight = store.add(
            format!("{name}.weight"),
            glorot_uniform(fan_in, fan_out, rng),
        );
        let bias = store.add(format!("{name}.bias"), Matrix::zeros(1, fan_out));
        Self { weight, bias }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        x: Tensor,
    ) -> Result<Tensor, AutodiffError> {
        let xw = tape.matmul(x, params.get(self.weight))?;
        tape.add_row_bias(xw, params.get(self.bias))
    }
}

/// Affine layers with ReLU between them and nothing after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpBlock {
    pub layers: Vec<Linear>,
}

impl MlpBlock {
    /// `dims = [in, hidden…, out]`.
    pub fn init(store: &mut ParamStore, name: &str, dims: &[usize], rng: &mut SeededRng) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::init(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        x: Tensor,
    ) -> Result<Tensor, AutodiffError> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = tape.relu(h);
            }
            h = layer.forward(tape, params, h)?;
        }
        Ok(h)
    }
}

/// Column-wise mean of node embeddings, a 1×F graph vector.
pub fn global_mean_readout(tape: &mut Tape, h: Tensor) -> Result<Tensor, AutodiffError> {
    tape.mean_rows(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[Matrix]) -> (ParamStore, Vec<ParamId>) {
        let mut s = ParamStore::new();
        let ids = values
            .iter()
            .enumerate()
            .map(|(i, v)| s.add(format!("p{i}"), v.clone()))
            .collect();
        (s, ids)
    }

    #[test]
    fn normalize_adjacency_examples() {
        let path = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(normalize_adjacency(&path), Matrix::filled(2, 2, 0.5));
        assert_eq!(
            normalize_adjacency(&Matrix::zeros(1, 1)),
            Matrix::scalar(1.0)
        );
    }

    #[test]
    fn gcn_single_node_identity_relu() {
        let (store, ids) = store_with(&[Matrix::identity(2)]);
        let layer = GcnLayer {
            weight: ids[0],
            activation: Activation::Relu,
        };
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let a = tape.constant(normalize_adjacency(&Matrix::zeros(1, 1)));
        let h = tape.constant(Matrix::from_rows(&[[-1.0, 2.0]]));
        let out = layer.forward(&mut tape, &p, a, h).unwrap();
        assert_eq!(tape.value(out).as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn gcn_two_node_path() {
        let (store, ids) = store_with(&[Matrix::identity(2)]);
        let layer = GcnLayer {
            weight: ids[0],
            activation: Activation::Relu,
        };
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let a = tape.constant(normalize_adjacency(&Matrix::from_rows(&[
            [0.0, 1.0],
            [1.0, 0.0],
        ])));
        let h = tape.constant(Matrix::identity(2));
        let out = layer.forward(&mut tape, &p, a, h).unwrap();
        assert_eq!(tape.value(out), &Matrix::filled(2, 2, 0.5));
        let zero = tape.constant(Matrix::zeros(2, 2));
        let out = layer.forward(&mut tape, &p, a, zero).unwrap();
        assert_eq!(tape.value(out), &Matrix::zeros(2, 2));
        let bad = tape.constant(Matrix::zeros(3, 2));
        assert!(layer.forward(&mut tape, &p, a, bad).is_err());
    }

    #[test]
    fn mlp_identity_and_bias_paths() {
        let (store, ids) = store_with(&[Matrix::identity(2), Matrix::zeros(1, 2)]);
        let mlp = MlpBlock {
            layers: vec![Linear {
                weight: ids[0],
                bias: ids[1],
            }],
        };
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let x = tape.constant(Matrix::from_rows(&[[1.5, -2.0], [0.0, 3.0]]));
        let y = mlp.forward(&mut tape, &p, x).unwrap();
        assert_eq!(tape.value(y), tape.value(x));

        let (store, ids) =
            store_with(&[Matrix::zeros(2, 3), Matrix::from_rows(&[[1.0, -2.0, 0.5]])]);
        let mlp = MlpBlock {
            layers: vec![Linear {
                weight: ids[0],
                bias: ids[1],
            }],
        };
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let x = tape.constant(Matrix::from_rows(&[[4.0, 4.0], [-1.0, 9.0]]));
        let y = mlp.forward(&mut tape, &p, x).unwrap();
        assert_eq!(
            tape.value(y),
            &Matrix::from_rows(&[[1.0, -2.0, 0.5], [1.0, -2.0, 0.5]])
        );
    }

    #[test]
    fn mlp_hidden_layer_hand_case() {
        // x·W1 + b1 = [1 - 3 + 3, 2 - 4 + 0] = [1, -2], relu -> [1, 0], then 1·2 + 0·5 + 0.5
        let (store, ids) = store_with(&[
            Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]),
            Matrix::from_rows(&[[3.0, 0.0]]),
            Matrix::from_rows(&[[2.0], [5.0]]),
            Matrix::from_rows(&[[0.5]]),
        ]);
        let mlp = MlpBlock {
            layers: vec![
                Linear {
                    weight: ids[0],
                    bias: ids[1],
                },
                Linear {
                    weight: ids[2],
                    bias: ids[3],
                },
            ],
        };
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let x = tape.constant(Matrix::from_rows(&[[1.0, -1.0]]));
        let y = mlp.forward(&mut tape, &p, x).unwrap();
        assert_eq!(tape.value(y).item(), 2.5);
    }

    #[test]
    fn mean_readout() {
        let mut tape = Tape::new();
        let h = tape.constant(Matrix::from_rows(&[[1.0, 3.0], [3.0, 1.0]]));
        let r = global_mean_readout(&mut tape, h).unwrap();
        assert_eq!(tape.value(r).as_slice(), &[2.0, 2.0]);
        let one = tape.constant(Matrix::from_rows(&[[4.0, -1.0]]));
        let r = global_mean_readout(&mut tape, one).unwrap();
        assert_eq!(tape.value(r).as_slice(), &[4.0, -1.0]);
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = SeededRng::new(0);
        let w = glorot_uniform(4, 64, &mut rng);
        let a = (6.0f64 / 68.0).sqrt();
        assert!(w.as_slice().iter().all(|v| v.abs() < a));
    }
}
