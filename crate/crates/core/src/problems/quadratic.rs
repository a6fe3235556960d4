use super::LocalObjectives;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::ManifoldSpec;

const DATA_STREAM: u64 = 0x7175_6164;

/// `f_i(x) = ½‖x − b_i‖²`. The minimizer of the average is the projection of
/// the mean target.
#[derive(Debug, Clone)]
pub struct QuadraticData {
    targets: Vec<Mat>,
    manifold: ManifoldSpec,
    minimizer: Mat,
}

impl QuadraticData {
    pub fn new(manifold: ManifoldSpec, targets: Vec<Mat>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidArgument(
                "quadratic needs at least one agent".into(),
            ));
        }
        for b in &targets {
            Error::check_shape(manifold.shape(), b.shape())?;
        }
        let mean = targets
            .iter()
            .fold(Mat::zeros(manifold.rows(), manifold.cols()), |acc, b| {
                acc + b
            })
            / targets.len() as f64;
        let minimizer = manifold.project(&mean)?;
        Ok(Self {
            targets,
            manifold,
            minimizer,
        })
    }

    pub fn targets(&self) -> &[Mat] {
        &self.targets
    }
}

impl LocalObjectives for QuadraticData {
    fn manifold(&self) -> ManifoldSpec {
        self.manifold
    }

    fn agents(&self) -> usize {
        self.targets.len()
    }

    fn local_value(&self, agent: usize, x: &Mat) -> Result<f64> {
        Error::check_shape(self.manifold.shape(), x.shape())?;
        Ok(0.5 * (x - &self.targets[agent]).norm_squared())
    }

    fn local_gradient(&self, agent: usize, x: &Mat) -> Result<Mat> {
        Error::check_shape(self.manifold.shape(), x.shape())?;
        Ok(x - &self.targets[agent])
    }

    fn ground_truth(&self) -> Option<&Mat> {
        Some(&self.minimizer)
    }

    fn smoothness_estimate(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Gaussian targets `b_i ∈ ℝ^{d×r}` for `agents` agents.
pub fn generate_quadratic(
    manifold: ManifoldSpec,
    agents: usize,
    seed: u64,
) -> Result<QuadraticData> {
    let mut rng = linalg::stream_rng(seed, DATA_STREAM);
    let (d, r) = manifold.shape();
    let targets = (0..agents)
        .map(|_| linalg::gaussian(d, r, &mut rng))
        .collect();
    QuadraticData::new(manifold, targets)
}
