use rand::{Rng, RngCore};

use super::{random_partition, LocalObjectives};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::ManifoldSpec;

const DATA_STREAM: u64 = 0x6c72_6d63;

/// Ridge weight on the inner least-squares coefficients.
pub const DEFAULT_RIDGE: f64 = 0.1;

/// Observation density `r(d + T − r)/(dT)`.
pub fn sampling_density(rows: usize, cols: usize, rank: usize) -> f64 {
    (rank * (rows + cols - rank)) as f64 / (rows * cols) as f64
}

/// One agent's column block `A_i ∈ ℝ^{d×T_i}` and its 0-1 observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LrmcBlock {
    values: Mat,
    mask: Mat,
    observed: Vec<Vec<usize>>,
}

impl LrmcBlock {
    pub fn new(values: Mat, mask: Mat) -> Result<Self> {
        Error::check_shape(values.shape(), mask.shape())?;
        if let Some(bad) = mask.iter().find(|&&m| m != 0.0 && m != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mask entry {bad} is not 0 or 1"
            )));
        }
        let observed = (0..mask.ncols())
            .map(|t| (0..mask.nrows()).filter(|&i| mask[(i, t)] == 1.0).collect())
            .collect();
        Ok(Self {
            values,
            mask,
            observed,
        })
    }

    pub fn fully_observed(values: Mat) -> Self {
        let mask = Mat::from_element(values.nrows(), values.ncols(), 1.0);
        Self::new(values, mask).expect("all-ones mask is valid")
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn mask(&self) -> &Mat {
        &self.mask
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().map(Vec::len).sum()
    }

    /// The same block restricted to the given columns.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            values: self.values.select_columns(cols.iter()),
            mask: self.mask.select_columns(cols.iter()),
            observed: cols.iter().map(|&t| self.observed[t].clone()).collect(),
        }
    }

    fn check_point(&self, x: &Mat) -> Result<()> {
        if x.nrows() != self.rows() {
            return Err(Error::DimensionMismatch {
                expected: (self.rows(), x.ncols()),
                actual: x.shape(),
            });
        }
        Ok(())
    }

    /// Ridge solution for column `t`: `(X_Ωᵀ X_Ω + ε I) v = X_Ωᵀ a_Ω`.
    fn solve_column(&self, x: &Mat, t: usize, ridge: f64) -> Mat {
        let r = x.ncols();
        let rows = &self.observed[t];
        if rows.is_empty() {
            return Mat::zeros(r, 1);
        }
        let xo = x.select_rows(rows.iter());
        let ao = Mat::from_iterator(rows.len(), 1, rows.iter().map(|&i| self.values[(i, t)]));
        let mut gram = xo.transpose() * &xo;
        for k in 0..r {
            gram[(k, k)] += ridge;
        }
        let rhs = xo.transpose() * ao;
        match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram.lu().solve(&rhs).unwrap_or_else(|| Mat::zeros(r, 1)),
        }
    }

    /// Masked residual `P_Ω(XV − A)` as a dense `d×T_i` matrix.
    fn residual(&self, x: &Mat, v: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows(), self.cols());
        for (t, rows) in self.observed.iter().enumerate() {
            for &i in rows {
                let fit: f64 = (0..x.ncols()).map(|k| x[(i, k)] * v[(k, t)]).sum();
                out[(i, t)] = fit - self.values[(i, t)];
            }
        }
        out
    }
}

/// `V_i(X)`: per-column ridge least squares over the observed rows, `r×T_i`.
pub fn lrmc_inner_solve(block: &LrmcBlock, x: &Mat, ridge: f64) -> Result<Mat> {
    block.check_point(x)?;
    let r = x.ncols();
    let mut v = Mat::zeros(r, block.cols());
    for t in 0..block.cols() {
        v.column_mut(t).copy_from(&block.solve_column(x, t, ridge));
    }
    Ok(v)
}

/// `½‖P_Ω(X V_i(X) − A_i)‖²`.
pub fn lrmc_objective(block: &LrmcBlock, x: &Mat, ridge: f64) -> Result<f64> {
    let v = lrmc_inner_solve(block, x, ridge)?;
    Ok(0.5 * block.residual(x, &v).norm_squared())
}

/// `½‖P_Ω(X V_i(X) − A_i)‖² + ½ε‖V_i(X)‖²`, the value whose exact gradient
/// [`lrmc_euclidean_gradient`] returns.
pub fn lrmc_penalized_objective(block: &LrmcBlock, x: &Mat, ridge: f64) -> Result<f64> {
    let v = lrmc_inner_solve(block, x, ridge)?;
    Ok(0.5 * block.residual(x, &v).norm_squared() + 0.5 * ridge * v.norm_squared())
}

/// `P_Ω(X V − A) Vᵀ` with `V = V_i(X)` held fixed.
pub fn lrmc_euclidean_gradient(block: &LrmcBlock, x: &Mat, ridge: f64) -> Result<Mat> {
    let v = lrmc_inner_solve(block, x, ridge)?;
    Ok(block.residual(x, &v) * v.transpose())
}

#[derive(Debug, Clone)]
pub struct LrmcData {
    blocks: Vec<LrmcBlock>,
    ridge: f64,
    manifold: ManifoldSpec,
    ground_truth: Option<Mat>,
}

impl LrmcData {
    pub fn new(blocks: Vec<LrmcBlock>, rank: usize, ridge: f64) -> Result<Self> {
        let d = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("LRMC needs at least one agent".into()))?
            .rows();
        if let Some(b) = blocks.iter().find(|b| b.rows() != d) {
            return Err(Error::Shape(format!(
                "all blocks need {d} rows, found one with {}",
                b.rows()
            )));
        }
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ridge {ridge} must be positive"
            )));
        }
        Ok(Self {
            blocks,
            ridge,
            manifold: ManifoldSpec::stiefel(d, rank)?,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(mut self, x_star: Mat) -> Result<Self> {
        Error::check_shape(self.manifold.shape(), x_star.shape())?;
        self.ground_truth = Some(x_star);
        Ok(self)
    }

    pub fn blocks(&self) -> &[LrmcBlock] {
        &self.blocks
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn observed_fraction(&self) -> f64 {
        let seen: usize = self.blocks.iter().map(LrmcBlock::observed_count).sum();
        let total: usize = self.blocks.iter().map(|b| b.rows() * b.cols()).sum();
        seen as f64 / total as f64
    }
}

impl LocalObjectives for LrmcData {
    fn manifold(&self) -> ManifoldSpec {
        self.manifold
    }

    fn agents(&self) -> usize {
        self.blocks.len()
    }

    fn local_value(&self, agent: usize, x: &Mat) -> Result<f64> {
        Error::check_shape(self.manifold.shape(), x.shape())?;
        lrmc_objective(&self.blocks[agent], x, self.ridge)
    }

    fn local_gradient(&self, agent: usize, x: &Mat) -> Result<Mat> {
        Error::check_shape(self.manifold.shape(), x.shape())?;
        lrmc_euclidean_gradient(&self.blocks[agent], x, self.ridge)
    }

    fn sampled_gradient(
        &self,
        agent: usize,
        x: &Mat,
        batch: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(Mat, f64)> {
        let block = &self.blocks[agent];
        let cols = block.cols();
        if batch == 0 || batch >= cols {
            return Ok((self.local_gradient(agent, x)?, 1.0));
        }
        Error::check_shape(self.manifold.shape(), x.shape())?;
        let picked = rand::seq::index::sample(rng, cols, batch).into_vec();
        let sub = block.select_columns(&picked);
        let g = lrmc_euclidean_gradient(&sub, x, self.ridge)? * (cols as f64 / batch as f64);
        Ok((g, batch as f64 / cols as f64))
    }

    fn ground_truth(&self) -> Option<&Mat> {
        self.ground_truth.as_ref()
    }
}

/// Parameters of the synthetic completion generator.
#[derive(Debug, Clone, PartialEq)]
pub struct LrmcSynthetic {
    pub agents: usize,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub ridge: f64,
    /// Observation probability; `None` uses [`sampling_density`].
    pub density: Option<f64>,
}

impl Default for LrmcSynthetic {
    fn default() -> Self {
        Self {
            agents: 8,
            rows: 100,
            cols: 1000,
            rank: 5,
            ridge: DEFAULT_RIDGE,
            density: None,
        }
    }
}

impl LrmcSynthetic {
    pub fn resolved_density(&self) -> f64 {
        self.density
            .unwrap_or_else(|| sampling_density(self.rows, self.cols, self.rank))
    }
}

/// `A = L R` with Gaussian factors, observed where a uniform draw falls below
/// the density, columns shuffled into equal agent blocks. The ground truth is
/// the polar factor of `L`.
pub fn generate_synthetic_lrmc(params: &LrmcSynthetic, seed: u64) -> Result<LrmcData> {
    let LrmcSynthetic {
        agents,
        rows,
        cols,
        rank,
        ridge,
        ..
    } = *params;
    if agents == 0 || rows == 0 || cols == 0 || rank == 0 || rank > rows.min(cols) {
        return Err(Error::InvalidArgument(format!(
            "invalid LRMC sizes n={agents}, d={rows}, T={cols}, r={rank}"
        )));
    }
    if cols % agents != 0 {
        return Err(Error::IndivisibleSplit {
            total: cols,
            agents,
        });
    }
    let density = params.resolved_density();
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!(
            "density {density} outside [0, 1]"
        )));
    }

    let mut rng = linalg::stream_rng(seed, DATA_STREAM);
    let left = linalg::gaussian(rows, rank, &mut rng);
    let right = linalg::gaussian(rank, cols, &mut rng);
    let full = &left * &right;
    let mask = Mat::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < density {
            1.0
        } else {
            0.0
        }
    });
    let parts = random_partition(cols, agents, &mut rng)?;
    let blocks = parts
        .iter()
        .map(|c| LrmcBlock::new(full.select_columns(c.iter()), mask.select_columns(c.iter())))
        .collect::<Result<Vec<_>>>()?;
    let (x_star, _) = linalg::polar_factor(&left);
    LrmcData::new(blocks, rank, ridge)?.with_ground_truth(x_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian, stream_rng};
    use approx::assert_abs_diff_eq;

    fn random_block(d: usize, t: usize, density: f64, rng: &mut impl Rng) -> LrmcBlock {
        let values = gaussian(d, t, rng);
        let mask = Mat::from_fn(d, t, |_, _| (rng.random::<f64>() < density) as u8 as f64);
        LrmcBlock::new(values, mask).unwrap()
    }

    #[test]
    fn density_formula() {
        assert_abs_diff_eq!(sampling_density(100, 1000, 5), 0.05475, epsilon = 1e-15);
    }

    #[test]
    fn inner_solve_recovers_consistent_coefficients() {
        let mut rng = stream_rng(1, 0);
        let st = ManifoldSpec::stiefel(12, 3).unwrap();
        let x = st.random_point(&mut rng);
        let v_star = gaussian(3, 7, &mut rng);
        let block = LrmcBlock::fully_observed(&x * &v_star);
        let v = lrmc_inner_solve(&block, &x, 1e-8).unwrap();
        // With orthonormal X and every entry seen, the ridge shrinks V by 1/(1+ε).
        assert!((v - &v_star / (1.0 + 1e-8)).amax() < 1e-12);
        assert!(lrmc_objective(&block, &x, 1e-8).unwrap() <= 1e-12);
        let shrink = 1e-8 / (1.0 + 1e-8);
        let expected = -(&x * &v_star * v_star.transpose()) * (shrink / (1.0 + 1e-8));
        let grad = lrmc_euclidean_gradient(&block, &x, 1e-8).unwrap();
        assert!((grad - &expected).norm() <= 1e-6 * expected.norm());
    }

    #[test]
    fn unobserved_column_gives_zero_coefficients() {
        let mut rng = stream_rng(2, 0);
        let x = ManifoldSpec::stiefel(6, 2).unwrap().random_point(&mut rng);
        let mut mask = Mat::from_element(6, 3, 1.0);
        mask.column_mut(1).fill(0.0);
        let block = LrmcBlock::new(gaussian(6, 3, &mut rng), mask).unwrap();
        let v = lrmc_inner_solve(&block, &x, 1e-8).unwrap();
        assert_eq!(v.column(1).amax(), 0.0);
        assert!(v.column(0).amax() > 0.0);
    }

    #[test]
    fn empty_mask_is_zero_everywhere() {
        let mut rng = stream_rng(3, 0);
        let x = ManifoldSpec::stiefel(5, 2).unwrap().random_point(&mut rng);
        let block = LrmcBlock::new(gaussian(5, 4, &mut rng), Mat::zeros(5, 4)).unwrap();
        assert_eq!(lrmc_objective(&block, &x, 1e-8).unwrap(), 0.0);
        assert_eq!(
            lrmc_euclidean_gradient(&block, &x, 1e-8).unwrap(),
            Mat::zeros(5, 2)
        );
    }

    #[test]
    fn unobserved_values_are_ignored() {
        let mut rng = stream_rng(4, 0);
        let x = ManifoldSpec::stiefel(8, 2).unwrap().random_point(&mut rng);
        let a = random_block(8, 10, 0.5, &mut rng);
        let mut garbage = a.values().clone();
        for (v, m) in garbage.iter_mut().zip(a.mask().iter()) {
            if *m == 0.0 {
                *v = 1e6;
            }
        }
        let b = LrmcBlock::new(garbage, a.mask().clone()).unwrap();
        assert_eq!(
            lrmc_objective(&a, &x, 1e-8).unwrap(),
            lrmc_objective(&b, &x, 1e-8).unwrap()
        );
    }

    #[test]
    fn normal_equations_hold_per_column() {
        let mut rng = stream_rng(5, 0);
        let ridge = 1e-8;
        let x = ManifoldSpec::stiefel(100, 5)
            .unwrap()
            .random_point(&mut rng);
        let block = random_block(100, 60, sampling_density(100, 1000, 5), &mut rng);
        let v = lrmc_inner_solve(&block, &x, ridge).unwrap();
        for t in 0..block.cols() {
            // (X_Ωᵀ X_Ω + εI) v − X_Ωᵀ a_Ω, assembled from the dense mask.
            let mut lhs = v.column(t) * ridge;
            let mut rhs = Mat::zeros(5, 1);
            for i in 0..100 {
                if block.mask()[(i, t)] == 1.0 {
                    let xi = x.row(i).transpose();
                    lhs += &xi * (x.row(i) * v.column(t));
                    rhs += &xi * block.values()[(i, t)];
                }
            }
            assert!((lhs - rhs).amax() <= 1e-10, "column {t}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream_rng(6, 0);
        let h = 1e-5;
        for _ in 0..50 {
            let x = ManifoldSpec::stiefel(20, 3).unwrap().random_point(&mut rng);
            let block = random_block(20, 50, 0.5, &mut rng);
            let g = lrmc_euclidean_gradient(&block, &x, 1e-8).unwrap();
            let fd = Mat::from_fn(20, 3, |i, j| {
                let mut p = x.clone();
                let mut m = x.clone();
                p[(i, j)] += h;
                m[(i, j)] -= h;
                (lrmc_objective(&block, &p, 1e-8).unwrap()
                    - lrmc_objective(&block, &m, 1e-8).unwrap())
                    / (2.0 * h)
            });
            assert!((&g - &fd).norm() <= 1e-4 * g.norm());
        }
    }

    #[test]
    fn gradient_is_exact_for_the_penalized_value() {
        let mut rng = stream_rng(7, 0);
        let h = 1e-5;
        let ridge = 0.1;
        let x = ManifoldSpec::stiefel(15, 3).unwrap().random_point(&mut rng);
        let block = random_block(15, 30, 0.2, &mut rng);
        let g = lrmc_euclidean_gradient(&block, &x, ridge).unwrap();
        let fd = Mat::from_fn(15, 3, |i, j| {
            let mut p = x.clone();
            let mut m = x.clone();
            p[(i, j)] += h;
            m[(i, j)] -= h;
            (lrmc_penalized_objective(&block, &p, ridge).unwrap()
                - lrmc_penalized_objective(&block, &m, ridge).unwrap())
                / (2.0 * h)
        });
        assert!((&g - &fd).norm() <= 1e-6 * g.norm());
    }

    #[test]
    fn synthetic_instance_shapes_and_density() {
        let params = LrmcSynthetic {
            ridge: 1e-8,
            ..LrmcSynthetic::default()
        };
        let data = generate_synthetic_lrmc(&params, 11).unwrap();
        assert_eq!(data.agents(), 8);
        assert!(data
            .blocks()
            .iter()
            .all(|b| b.values().shape() == (100, 125)));
        // Bernoulli mean with 1e5 draws: standard error ≈ 7e-4.
        assert!((data.observed_fraction() - 0.05475).abs() < 5e-3);
        assert!(matches!(
            generate_synthetic_lrmc(
                &LrmcSynthetic {
                    agents: 7,
                    ..params
                },
                11
            ),
            Err(Error::IndivisibleSplit {
                total: 1000,
                agents: 7
            })
        ));
    }

    #[test]
    fn ground_truth_fits_fully_observed_data() {
        let params = LrmcSynthetic {
            agents: 4,
            rows: 30,
            cols: 40,
            rank: 3,
            ridge: 1e-8,
            density: Some(1.0),
        };
        let data = generate_synthetic_lrmc(&params, 2).unwrap();
        let x_star = data.ground_truth().unwrap();
        assert!(data.global_value(x_star).unwrap() <= 1e-10);
    }

    #[test]
    fn single_agent_descent_is_monotone() {
        let params = LrmcSynthetic {
            agents: 1,
            rows: 30,
            cols: 60,
            rank: 3,
            ridge: DEFAULT_RIDGE,
            density: None,
        };
        let data = generate_synthetic_lrmc(&params, 5).unwrap();
        let st = data.manifold();
        let mut x = st.random_point(&mut stream_rng(5, 1));
        let mut prev = data.global_value(&x).unwrap();
        for _ in 0..50 {
            let g = data.global_gradient(&x).unwrap();
            let rg = st.riemannian_gradient(&x, &g).unwrap();
            x = st.project(&(&x - rg * 1e-3)).unwrap();
            let f = data.global_value(&x).unwrap();
            assert!(f <= prev + 1e-12);
            prev = f;
        }
    }

    #[test]
    fn column_minibatch_is_unbiased() {
        let mut rng = stream_rng(8, 0);
        let block = random_block(10, 20, 0.6, &mut rng);
        let data = LrmcData::new(vec![block], 2, 0.1).unwrap();
        let x = data.manifold().random_point(&mut rng);
        let full = data.local_gradient(0, &x).unwrap();
        let mut mean = Mat::zeros(10, 2);
        let draws = 4000;
        for _ in 0..draws {
            let (g, frac) = data.sampled_gradient(0, &x, 5, &mut rng).unwrap();
            assert_eq!(frac, 0.25);
            mean += g;
        }
        mean /= draws as f64;
        assert!((mean - &full).norm() < 0.1 * full.norm());
    }

    #[test]
    fn rejects_non_binary_mask() {
        assert!(LrmcBlock::new(Mat::zeros(2, 2), Mat::from_element(2, 2, 0.5)).is_err());
    }
}
