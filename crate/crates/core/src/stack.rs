use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// The agents' local matrices `x_1, …, x_n`, i.e. the block rows of the
/// stacked variable in `ℝ^{(nd)×r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStack {
    blocks: Vec<Mat>,
}

impl AgentStack {
    pub fn new(blocks: Vec<Mat>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("agent stack needs at least one block".into()))?;
        let shape = first.shape();
        for b in &blocks {
            Error::check_shape(shape, b.shape())?;
        }
        Ok(Self { blocks })
    }

    /// `n` copies of the same block.
    pub fn consensual(x: &Mat, n: usize) -> Self {
        Self {
            blocks: vec![x.clone(); n],
        }
    }

    pub fn zeros(n: usize, rows: usize, cols: usize) -> Self {
        Self::consensual(&Mat::zeros(rows, cols), n)
    }

    pub fn agents(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.blocks[0].shape()
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Mat> {
        self.blocks.iter()
    }

    pub fn into_blocks(self) -> Vec<Mat> {
        self.blocks
    }

    /// Euclidean average `x̂ = (1/n) Σ x_i`.
    pub fn mean(&self) -> Mat {
        let mut acc = Mat::zeros(self.blocks[0].nrows(), self.blocks[0].ncols());
        for b in &self.blocks {
            acc += b;
        }
        acc / self.agents() as f64
    }

    pub fn sum(&self) -> Mat {
        let mut acc = Mat::zeros(self.blocks[0].nrows(), self.blocks[0].ncols());
        for b in &self.blocks {
            acc += b;
        }
        acc
    }

    /// Frobenius norm of the stacked matrix.
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn norm_squared(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    /// `‖x − 1⊗c‖_F` for a common point `c`.
    pub fn distance_to_common(&self, c: &Mat) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - c).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn map<F: FnMut(usize, &Mat) -> Mat>(&self, mut f: F) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| f(i, b))
                .collect(),
        }
    }

    pub fn try_map<F: FnMut(usize, &Mat) -> Result<Mat>>(&self, mut f: F) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| f(i, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn zip_map<F: FnMut(&Mat, &Mat) -> Mat>(&self, other: &Self, mut f: F) -> Self {
        debug_assert_eq!(self.agents(), other.agents());
        Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    /// One synchronous mixing round `(M ⊗ I_d) x`, applied blockwise: agent
    /// `i` accumulates `M_ij x_j` over its nonzero weights in increasing `j`.
    pub fn mix(&self, weights: &Mat) -> Self {
        let n = self.agents();
        assert_eq!(
            weights.shape(),
            (n, n),
            "mixing matrix does not match agent count"
        );
        let (rows, cols) = self.block_shape();
        let blocks = (0..n)
            .map(|i| {
                let mut acc = Mat::zeros(rows, cols);
                for j in 0..n {
                    let w = weights[(i, j)];
                    if w != 0.0 {
                        acc += &self.blocks[j] * w;
                    }
                }
                acc
            })
            .collect();
        Self { blocks }
    }

    /// `rounds` successive mixing rounds.
    pub fn mix_rounds(&self, weights: &Mat, rounds: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..rounds {
            out = out.mix(weights);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| linalg::inner(a, b))
            .sum()
    }
}

impl Index<usize> for AgentStack {
    type Output = Mat;

    fn index(&self, i: usize) -> &Mat {
        &self.blocks[i]
    }
}

impl IndexMut<usize> for AgentStack {
    fn index_mut(&mut self, i: usize) -> &mut Mat {
        &mut self.blocks[i]
    }
}

impl<'a> IntoIterator for &'a AgentStack {
    type Item = &'a Mat;
    type IntoIter = std::slice::Iter<'a, Mat>;

    fn into_iter(self) -> Self::IntoIter {
        self.blocks.iter()
    }
}
