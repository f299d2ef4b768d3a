use crate::autodiff::{AutodiffError, Matrix, Tape, Tensor};
use crate::graph_io::SeededRng;
use crate::layers::{Bound, ParamId, ParamStore};

/// `⌈k·N⌉`, at least 1. A 1e-9 slack keeps products such as `0.1 · 30`
/// from rounding up past the integer they represent.
pub fn supernode_count(node_count: usize, ratio: f64) -> usize {
    ((ratio * node_count as f64 - 1e-9).ceil() as usize).clamp(1, node_count.max(1))
}

/// Indices of the `m` largest scores, highest first; equal scores keep the
/// lower index first.
pub fn top_indices(scores: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(m);
    order
}

/// Projection scorer `y = H·p / ‖p‖₂` with pooling ratio `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopKScorer {
    pub p: ParamId,
    pub ratio: f64,
}

impl TopKScorer {
    /// `p` is drawn uniform(−1, 1) per entry and redrawn until nonzero.
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        ratio: f64,
        rng: &mut SeededRng,
    ) -> Self {
        let p = loop {
            let p = Matrix::from_fn(dim, 1, |_, _| rng.uniform(-1.0, 1.0));
            if p.frobenius_norm() > 0.0 {
                break p;
            }
        };
        Self {
            p: store.add(format!("{name}.p"), p),
            ratio,
        }
    }

    /// All N scores as an N×1 tensor.
    pub fn scores(
        &self,
        tape: &mut Tape,
        params: &Bound,
        h: Tensor,
    ) -> Result<Tensor, AutodiffError> {
        let p = params.get(self.p);
        let raw = tape.matmul(h, p)?;
        let norm = tape.frobenius_norm(p);
        tape.div(raw, norm)
    }
}

/// Result of keeping the `⌈kN⌉` best-scoring nodes.
#[derive(Debug, Clone)]
pub struct TopKSelection {
    /// Kept node indices, best first.
    pub indices: Vec<usize>,
    /// All N scores (N×1).
    pub all_scores: Tensor,
    /// Scores of the kept nodes (m×1), in `indices` order.
    pub scores: Tensor,
    /// Rows of the scored embedding at `indices` (m×F).
    pub rep: Tensor,
}

/// Keeps the `⌈ratio·N⌉` rows of `h` with the highest entries of the N×1
/// `scores`.
pub fn select_top(
    tape: &mut Tape,
    h: Tensor,
    scores: Tensor,
    ratio: f64,
) -> Result<TopKSelection, AutodiffError> {
    let (n, _) = tape.shape(h);
    if tape.shape(scores) != (n, 1) {
        return Err(AutodiffError::Shape {
            op: "select_top",
            lhs: tape.shape(h),
            rhs: tape.shape(scores),
        });
    }
    let m = supernode_count(n, ratio);
    let indices = top_indices(tape.value(scores).as_slice(), m);
    let selected = tape.gather_rows(scores, &indices)?;
    let rep = tape.gather_rows(h, &indices)?;
    Ok(TopKSelection {
        indices,
        all_scores: scores,
        scores: selected,
        rep,
    })
}

/// Scores `h_emb` with the projection scorer and keeps the top `⌈kN⌉` rows.
pub fn topk_select(
    tape: &mut Tape,
    params: &Bound,
    h_emb: Tensor,
    scorer: &TopKScorer,
) -> Result<TopKSelection, AutodiffError> {
    let scores = scorer.scores(tape, params, h_emb)?;
    select_top(tape, h_emb, scores, scorer.ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_rule() {
        assert_eq!(supernode_count(5, 0.5), 3);
        assert_eq!(supernode_count(1, 0.5), 1);
        assert_eq!(supernode_count(2, 0.5), 1);
        assert_eq!(supernode_count(30, 0.1), 3);
        assert_eq!(supernode_count(7, 1.0), 7);
    }

    #[test]
    fn ties_prefer_lower_index() {
        assert_eq!(top_indices(&[1.0, 3.0, 3.0, 0.0], 2), vec![1, 2]);
        assert_eq!(top_indices(&[0.0; 4], 2), vec![0, 1]);
    }

    #[test]
    fn projection_selection_hand_case() {
        let mut store = ParamStore::new();
        let p = store.add("p", Matrix::from_rows(&[[1.0], [0.0]]));
        let scorer = TopKScorer { p, ratio: 0.5 };
        let mut tape = Tape::new();
        let params = store.bind(&mut tape);
        let h = tape.constant(Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]]));
        let sel = topk_select(&mut tape, &params, h, &scorer).unwrap();
        assert_eq!(tape.value(sel.all_scores).as_slice(), &[1.0, 0.0, 2.0]);
        assert_eq!(sel.indices, vec![2, 0]);
        assert_eq!(
            tape.value(sel.rep),
            &Matrix::from_rows(&[[2.0, 0.0], [1.0, 0.0]])
        );
        assert_eq!(tape.value(sel.scores).as_slice(), &[2.0, 1.0]);
    }

    #[test]
    fn single_node_always_selected() {
        let mut store = ParamStore::new();
        let p = store.add("p", Matrix::from_rows(&[[0.3], [-2.0]]));
        let scorer = TopKScorer { p, ratio: 0.1 };
        let mut tape = Tape::new();
        let params = store.bind(&mut tape);
        let h = tape.constant(Matrix::from_rows(&[[5.0, 1.0]]));
        let sel = topk_select(&mut tape, &params, h, &scorer).unwrap();
        assert_eq!(sel.indices, vec![0]);
    }
}
