//! Block hold-out masks for two-dimensional cross-validation.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;

/// Rows and columns are shuffled into `k` balanced groups; block `g` is the
/// set of cells whose row and column both fall in group `g`. The held-out
/// mask is the union of the `q` selected blocks and the training mask is
/// its complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutMask {
    pub row_group: Vec<usize>,
    pub col_group: Vec<usize>,
    pub held_out_blocks: BTreeSet<usize>,
    pub k: usize,
    pub q: usize,
    pub seed: u64,
}

impl HoldoutMask {
    pub fn is_held_out(&self, i: usize, j: usize) -> bool {
        let g = self.row_group[i];
        g == self.col_group[j] && self.held_out_blocks.contains(&g)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_group.len(), self.col_group.len())
    }

    /// `M_v` as a dense 0/1 matrix.
    pub fn held_out(&self) -> Array2<f64> {
        Array2::from_shape_fn(self.shape(), |(i, j)| {
            f64::from(u8::from(self.is_held_out(i, j)))
        })
    }

    /// `M_t = 1 - M_v` as a dense 0/1 matrix.
    pub fn training(&self) -> Array2<f64> {
        self.held_out().mapv(|x| 1.0 - x)
    }

    pub fn held_out_count(&self) -> usize {
        self.held_out_blocks
            .iter()
            .map(|g| {
                let r = self.row_group.iter().filter(|&&x| x == *g).count();
                let c = self.col_group.iter().filter(|&&x| x == *g).count();
                r * c
            })
            .sum()
    }
}

fn balanced_groups(len: usize, k: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    let mut group = vec![0; len];
    for (pos, idx) in order.into_iter().enumerate() {
        group[idx] = pos % k;
    }
    group
}

/// Draws a seeded hold-out mask for an `m x n` matrix.
pub fn make_block_masks(m: usize, n: usize, k: usize, q: usize, seed: u64) -> Result<HoldoutMask> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "K = {k} must be at least 2"
        )));
    }
    if q == 0 || q >= k {
        return Err(Error::InvalidArgument(format!(
            "q = {q} must lie in [1, K) with K = {k}"
        )));
    }
    if k > m || k > n {
        return Err(Error::InvalidArgument(format!(
            "K = {k} exceeds matrix shape {m}x{n}"
        )));
    }
    let mut r = rng(seed);
    let row_group = balanced_groups(m, k, &mut r);
    let col_group = balanced_groups(n, k, &mut r);
    let held_out_blocks = index::sample(&mut r, k, q).into_iter().collect();
    Ok(HoldoutMask {
        row_group,
        col_group,
        held_out_blocks,
        k,
        q,
        seed,
    })
}
