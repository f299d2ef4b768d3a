use serde::{Deserialize, Serialize};

use super::{derive_seed, GraphIoError, SeededRng};

/// Train/validation/test index lists drawn from one seeded permutation.
///
/// Validation and test each get `⌊len/10⌋` graphs and training keeps the
/// remainder; with fewer than 10 graphs each partition still gets at least
/// one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

pub fn split_indices(len: usize, seed: u64) -> Result<SplitSpec, GraphIoError> {
    if len < 3 {
        return Err(GraphIoError::Invalid(format!(
            "cannot split {len} graphs into three nonempty partitions"
        )));
    }
    let mut held_out = len / 10;
    if held_out == 0 {
        log::warn!("only {len} graphs; using one graph each for validation and test");
        held_out = 1;
    }
    let mut perm: Vec<usize> = (0..len).collect();
    SeededRng::new(seed).shuffle(&mut perm);
    let test = perm.split_off(len - held_out);
    let val = perm.split_off(len - 2 * held_out);
    Ok(SplitSpec {
        seed,
        train: perm,
        val,
        test,
    })
}

/// Shuffles `indices` with a stream derived from `(seed, epoch)` and cuts
/// the result into batches of `batch_size`; the last batch may be short.
///
/// Panics if `batch_size` is zero.
pub fn batch_iter(indices: &[usize], batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut order = indices.to_vec();
    SeededRng::new(derive_seed(seed, epoch, "epoch")).shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
