//! Benchmark problems: each agent `i` holds a smooth local objective `f_i`
//! with a Euclidean-gradient oracle; the global objective is
//! `f = (1/n) Σ f_i`.

mod io;
mod lrmc;
mod pca;
mod quadratic;

use rand::RngCore;

pub use io::{load_matrix, parse_csv, read_raw_f64, save_matrix, write_raw_f64, MatrixFormat};
pub use lrmc::{
    generate_synthetic_lrmc, lrmc_euclidean_gradient, lrmc_inner_solve, lrmc_objective,
    lrmc_penalized_objective, sampling_density, LrmcBlock, LrmcData, LrmcSynthetic, DEFAULT_RIDGE,
};
pub use pca::{
    generate_synthetic_pca, pca_euclidean_gradient, pca_objective, PcaData, PcaSynthetic,
};
pub use quadratic::{generate_quadratic, QuadraticData};

use crate::error::Result;
use crate::linalg::Mat;
use crate::manifold::ManifoldSpec;

/// Per-agent objective oracles for a decentralized problem.
pub trait LocalObjectives: Sync {
    fn manifold(&self) -> ManifoldSpec;

    fn agents(&self) -> usize;

    fn local_value(&self, agent: usize, x: &Mat) -> Result<f64>;

    /// Euclidean gradient `∇f_i(x)`.
    fn local_gradient(&self, agent: usize, x: &Mat) -> Result<Mat>;

    /// Unbiased minibatch estimate of `∇f_i(x)` from `batch` local samples,
    /// and the fraction of the local data it touched. Problems without a
    /// sample structure return the full gradient.
    fn sampled_gradient(
        &self,
        agent: usize,
        x: &Mat,
        batch: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(Mat, f64)> {
        let _ = (batch, rng);
        Ok((self.local_gradient(agent, x)?, 1.0))
    }

    fn global_value(&self, x: &Mat) -> Result<f64> {
        let n = self.agents();
        let mut total = 0.0;
        for i in 0..n {
            total += self.local_value(i, x)?;
        }
        Ok(total / n as f64)
    }

    fn global_gradient(&self, x: &Mat) -> Result<Mat> {
        let n = self.agents();
        let mut acc = self.local_gradient(0, x)?;
        for i in 1..n {
            acc += self.local_gradient(i, x)?;
        }
        Ok(acc / n as f64)
    }

    /// Known solution, if any (used for the subspace-distance metric).
    fn ground_truth(&self) -> Option<&Mat> {
        None
    }

    /// Upper estimate of the local gradients' Lipschitz constant, when one is
    /// cheaply available.
    fn smoothness_estimate(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Pca,
    Lrmc,
    Quadratic,
}

#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Pca(PcaData),
    Lrmc(LrmcData),
    Quadratic(QuadraticData),
}

impl ProblemInstance {
    pub fn kind(&self) -> ObjectiveKind {
        match self {
            ProblemInstance::Pca(_) => ObjectiveKind::Pca,
            ProblemInstance::Lrmc(_) => ObjectiveKind::Lrmc,
            ProblemInstance::Quadratic(_) => ObjectiveKind::Quadratic,
        }
    }

    fn inner(&self) -> &dyn LocalObjectives {
        match self {
            ProblemInstance::Pca(p) => p,
            ProblemInstance::Lrmc(p) => p,
            ProblemInstance::Quadratic(p) => p,
        }
    }
}

impl LocalObjectives for ProblemInstance {
    fn manifold(&self) -> ManifoldSpec {
        self.inner().manifold()
    }

    fn agents(&self) -> usize {
        self.inner().agents()
    }

    fn local_value(&self, agent: usize, x: &Mat) -> Result<f64> {
        self.inner().local_value(agent, x)
    }

    fn local_gradient(&self, agent: usize, x: &Mat) -> Result<Mat> {
        self.inner().local_gradient(agent, x)
    }

    fn sampled_gradient(
        &self,
        agent: usize,
        x: &Mat,
        batch: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(Mat, f64)> {
        self.inner().sampled_gradient(agent, x, batch, rng)
    }

    fn global_value(&self, x: &Mat) -> Result<f64> {
        self.inner().global_value(x)
    }

    fn global_gradient(&self, x: &Mat) -> Result<Mat> {
        self.inner().global_gradient(x)
    }

    fn ground_truth(&self) -> Option<&Mat> {
        self.inner().ground_truth()
    }

    fn smoothness_estimate(&self) -> Option<f64> {
        self.inner().smoothness_estimate()
    }
}

impl From<PcaData> for ProblemInstance {
    fn from(p: PcaData) -> Self {
        ProblemInstance::Pca(p)
    }
}

impl From<LrmcData> for ProblemInstance {
    fn from(p: LrmcData) -> Self {
        ProblemInstance::Lrmc(p)
    }
}

impl From<QuadraticData> for ProblemInstance {
    fn from(p: QuadraticData) -> Self {
        ProblemInstance::Quadratic(p)
    }
}

/// Splits `0..total` into `agents` equal contiguous chunks of a random
/// permutation.
pub(crate) fn random_partition(
    total: usize,
    agents: usize,
    rng: &mut impl rand::Rng,
) -> Result<Vec<Vec<usize>>> {
    use rand::seq::SliceRandom;

    if agents == 0 || !total.is_multiple_of(agents) {
        return Err(crate::error::Error::IndivisibleSplit { total, agents });
    }
    let mut perm: Vec<usize> = (0..total).collect();
    perm.shuffle(rng);
    let chunk = total / agents;
    Ok(perm.chunks(chunk).map(|c| c.to_vec()).collect())
}
