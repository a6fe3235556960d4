use rand::RngCore;

use super::{random_partition, LocalObjectives};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::ManifoldSpec;

const DATA_STREAM: u64 = 0x0070_6361;

/// Per-agent term `−½ tr(xᵀ AᵢᵀAᵢ x)` of the decentralized PCA objective.
pub fn pca_objective(block: &Mat, x: &Mat) -> Result<f64> {
    Error::check_shape((block.ncols(), x.ncols()), x.shape())?;
    Ok(-0.5 * (block * x).norm_squared())
}

/// `−Aᵢᵀ(Aᵢ x)`.
pub fn pca_euclidean_gradient(block: &Mat, x: &Mat) -> Result<Mat> {
    Error::check_shape((block.ncols(), x.ncols()), x.shape())?;
    Ok(-(block.transpose() * (block * x)))
}

/// Row blocks `Aᵢ ∈ ℝ^{mᵢ×d}` of a data matrix, one per agent.
#[derive(Debug, Clone)]
pub struct PcaData {
    blocks: Vec<Mat>,
    grams: Vec<Mat>,
    manifold: ManifoldSpec,
    ground_truth: Option<Mat>,
}

impl PcaData {
    pub fn new(blocks: Vec<Mat>, rank: usize) -> Result<Self> {
        let d = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("PCA needs at least one agent".into()))?
            .ncols();
        for b in &blocks {
            if b.ncols() != d {
                return Err(Error::Shape(format!(
                    "all blocks need {d} columns, found one with {}",
                    b.ncols()
                )));
            }
        }
        let manifold = ManifoldSpec::stiefel(d, rank)?;
        let grams = blocks.iter().map(|b| b.transpose() * b).collect();
        Ok(Self {
            blocks,
            grams,
            manifold,
            ground_truth: None,
        })
    }

    /// Shuffles the rows of `data` into `agents` equal blocks and records the
    /// top-`rank` right singular subspace of `data` as ground truth.
    pub fn from_matrix(data: &Mat, agents: usize, rank: usize, seed: u64) -> Result<Self> {
        let mut rng = linalg::stream_rng(seed, DATA_STREAM);
        let parts = random_partition(data.nrows(), agents, &mut rng)?;
        let blocks = parts
            .iter()
            .map(|rows| data.select_rows(rows.iter()))
            .collect();
        let mut out = Self::new(blocks, rank)?;
        out.ground_truth = Some(linalg::top_eigenvectors(&(data.transpose() * data), rank));
        Ok(out)
    }

    pub fn with_ground_truth(mut self, x_star: Mat) -> Result<Self> {
        Error::check_shape(self.manifold.shape(), x_star.shape())?;
        self.ground_truth = Some(x_star);
        Ok(self)
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn gram(&self, agent: usize) -> &Mat {
        &self.grams[agent]
    }

    /// All blocks stacked back into one matrix (agent order).
    pub fn stacked(&self) -> Mat {
        let rows: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let d = self.manifold.rows();
        let mut out = Mat::zeros(rows, d);
        let mut at = 0;
        for b in &self.blocks {
            out.view_mut((at, 0), b.shape()).copy_from(b);
            at += b.nrows();
        }
        out
    }
}

impl LocalObjectives for PcaData {
    fn manifold(&self) -> ManifoldSpec {
        self.manifold
    }

    fn agents(&self) -> usize {
        self.blocks.len()
    }

    fn local_value(&self, agent: usize, x: &Mat) -> Result<f64> {
        Error::check_shape(self.manifold.shape(), x.shape())?;
        Ok(-0.5 * linalg::inner(x, &(&self.grams[agent] * x)))
    }

    fn local_gradient(&self, agent: usize, x: &Mat) -> Result<Mat> {
        Error::check_shape(self.manifold.shape(), x.shape())?;
        Ok(-(&self.grams[agent] * x))
    }

    fn sampled_gradient(
        &self,
        agent: usize,
        x: &Mat,
        batch: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(Mat, f64)> {
        let block = &self.blocks[agent];
        let m = block.nrows();
        if batch == 0 || batch >= m {
            return Ok((self.local_gradient(agent, x)?, 1.0));
        }
        let rows = rand::seq::index::sample(rng, m, batch).into_vec();
        let sub = block.select_rows(rows.iter());
        let g = pca_euclidean_gradient(&sub, x)? * (m as f64 / batch as f64);
        Ok((g, batch as f64 / m as f64))
    }

    fn ground_truth(&self) -> Option<&Mat> {
        self.ground_truth.as_ref()
    }

    fn smoothness_estimate(&self) -> Option<f64> {
        Some(
            self.grams
                .iter()
                .map(linalg::spectral_norm)
                .fold(0.0, f64::max),
        )
    }
}

/// Parameters of the synthetic PCA generator.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaSynthetic {
    pub agents: usize,
    pub rows_per_agent: usize,
    pub dim: usize,
    pub rank: usize,
    /// Geometric decay of the singular values, in `(0, 1)`.
    pub xi: f64,
    /// Common factor on all singular values; `None` uses `√(agents·rows_per_agent)`,
    /// the magnitude of the Gaussian draw's singular values.
    pub scale: Option<f64>,
}

impl Default for PcaSynthetic {
    fn default() -> Self {
        Self {
            agents: 8,
            rows_per_agent: 1000,
            dim: 10,
            rank: 5,
            xi: 0.8,
            scale: None,
        }
    }
}

impl PcaSynthetic {
    pub fn resolved_scale(&self) -> f64 {
        self.scale
            .unwrap_or_else(|| ((self.agents * self.rows_per_agent) as f64).sqrt())
    }
}

/// Draws `B` Gaussian, replaces its spectrum by `scale·ξ^j` (`j = 1..d`),
/// shuffles the rows into equal agent blocks and records the leading `r`
/// right singular vectors as the solution.
pub fn generate_synthetic_pca(params: &PcaSynthetic, seed: u64) -> Result<PcaData> {
    let PcaSynthetic {
        agents,
        rows_per_agent,
        dim,
        rank,
        xi,
        ..
    } = *params;
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidArgument(format!("xi {xi} outside (0, 1)")));
    }
    if agents == 0 || rows_per_agent == 0 || rank == 0 || rank > dim {
        return Err(Error::InvalidArgument(format!(
            "invalid PCA sizes n={agents}, m={rows_per_agent}, d={dim}, r={rank}"
        )));
    }
    let total = agents * rows_per_agent;
    if total < dim {
        return Err(Error::InvalidArgument(format!(
            "need at least d={dim} rows in total, have {total}"
        )));
    }
    let scale = params.resolved_scale();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale {scale} must be positive"
        )));
    }

    let mut rng = linalg::stream_rng(seed, DATA_STREAM);
    let b = linalg::gaussian(total, dim, &mut rng);
    let svd = linalg::thin_svd(&b);
    let smax = svd.singular_values[0];
    let rank_b = svd
        .singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-12)
        .count();
    if rank_b < dim {
        return Err(Error::RankDeficient {
            rank: rank_b,
            required: dim,
        });
    }

    let mut scaled_u = svd.u;
    for j in 0..dim {
        let sv = scale * xi.powi(j as i32 + 1);
        scaled_u.column_mut(j).scale_mut(sv);
    }
    let a = scaled_u * &svd.v_t;
    let v = svd.v_t.transpose();
    let x_star = v.columns(0, rank).into_owned();

    let parts = random_partition(total, agents, &mut rng)?;
    let blocks = parts
        .iter()
        .map(|rows| a.select_rows(rows.iter()))
        .collect();
    PcaData::new(blocks, rank)?.with_ground_truth(x_star)
}
