//! Metrics and inequality probes on agent stacks.

use std::fmt::Write as _;

use crate::algorithms::StepReport;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::{ManifoldKind, ManifoldSpec};
use crate::problems::LocalObjectives;
use crate::stack::AgentStack;

/// `x̄ = P(x̂)`, the manifold point nearest to the Euclidean average.
pub fn induced_mean(spec: &ManifoldSpec, x: &AgentStack) -> Result<Mat> {
    spec.project(&x.mean())
}

/// `(1/n) Σ ‖x_i − c‖²`.
pub fn consensus_error(x: &AgentStack, center: &Mat) -> f64 {
    x.distance_to_common(center).powi(2) / x.agents() as f64
}

/// `((1/n)Σ‖x_i − x̄‖², ‖grad f(x̄)‖)` with the centralized gradient.
pub fn stationarity(
    spec: &ManifoldSpec,
    problem: &dyn LocalObjectives,
    x: &AgentStack,
) -> Result<(f64, f64)> {
    let xbar = induced_mean(spec, x)?;
    let g = problem.global_gradient(&xbar)?;
    Ok((
        consensus_error(x, &xbar),
        spec.riemannian_gradient(&xbar, &g)?.norm(),
    ))
}

/// `min_Q ‖xQ − x*‖` over orthogonal `Q`.
pub fn subspace_distance(x: &Mat, x_star: &Mat) -> Result<f64> {
    Error::check_shape(x_star.shape(), x.shape())?;
    let svd = linalg::thin_svd(&(x.transpose() * x_star));
    let q = &svd.u * &svd.v_t;
    Ok((x * q - x_star).norm())
}

/// `φ(x) = ¼ ΣΣ W_ij ‖x_i − x_j‖²` with its Euclidean gradient `(I − W)x`
/// and the per-agent tangent projections of that gradient.
#[derive(Debug, Clone)]
pub struct ConsensusPotential {
    pub phi: f64,
    pub gradient: AgentStack,
    pub riemannian: AgentStack,
}

pub fn consensus_potential(
    spec: &ManifoldSpec,
    x: &AgentStack,
    w: &Mat,
) -> Result<ConsensusPotential> {
    let n = x.agents();
    Error::check_shape((n, n), w.shape())?;
    Error::check_shape(spec.shape(), x.block_shape())?;
    let mut phi = 0.0;
    for i in 0..n {
        for j in 0..n {
            if w[(i, j)] != 0.0 {
                phi += w[(i, j)] * (&x[i] - &x[j]).norm_squared();
            }
        }
    }
    let gradient = x.zip_map(&x.mix(w), |xi, wx| xi - wx);
    let riemannian = gradient.try_map(|i, g| spec.project_tangent(&x[i], g))?;
    Ok(ConsensusPotential {
        phi: phi / 4.0,
        gradient,
        riemannian,
    })
}

/// `(‖Σ grad φ_i‖, 2√n·L_P·‖x − x̄‖²)`.
pub fn consensus_gradient_bound_probe(
    spec: &ManifoldSpec,
    x: &AgentStack,
    w: &Mat,
) -> Result<(f64, f64)> {
    let pot = consensus_potential(spec, x, w)?;
    let xbar = induced_mean(spec, x)?;
    let spread = x.distance_to_common(&xbar);
    let n = x.agents() as f64;
    Ok((
        pot.riemannian.sum().norm(),
        2.0 * n.sqrt() * spec.tangent_projection_lipschitz() * spread * spread,
    ))
}

/// `(‖x̄ − x̂‖, M₂·‖x − x̄‖²/n)`.
pub fn mean_gap_probe(spec: &ManifoldSpec, x: &AgentStack) -> Result<(f64, f64)> {
    let xhat = x.mean();
    let xbar = spec.project(&xhat)?;
    let spread = x.distance_to_common(&xbar);
    Ok((
        (&xbar - &xhat).norm(),
        spec.mean_curvature_constant() * spread * spread / x.agents() as f64,
    ))
}

/// `(‖∇φ(x)‖, 2‖x − x̄‖)`.
pub fn potential_gradient_probe(
    spec: &ManifoldSpec,
    x: &AgentStack,
    w: &Mat,
) -> Result<(f64, f64)> {
    let pot = consensus_potential(spec, x, w)?;
    let xbar = induced_mean(spec, x)?;
    Ok((pot.gradient.norm(), 2.0 * x.distance_to_common(&xbar)))
}

/// Spectral norm of the consensus/correction recursion matrix
/// `[[W/(1−3δ) − J, I/(1−3δ)], [W − V, I − J]]`.
pub fn recursion_norm(w: &Mat, v: &Mat, delta: f64) -> Result<f64> {
    let n = w.nrows();
    Error::check_shape((n, n), w.shape())?;
    Error::check_shape((n, n), v.shape())?;
    if !(0.0..1.0 / 3.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} outside [0, 1/3)"
        )));
    }
    let scale = 1.0 / (1.0 - 3.0 * delta);
    let j = Mat::from_element(n, n, 1.0 / n as f64);
    let eye = linalg::identity(n);
    let mut q = Mat::zeros(2 * n, 2 * n);
    q.view_mut((0, 0), (n, n)).copy_from(&(w * scale - &j));
    q.view_mut((0, n), (n, n)).copy_from(&(&eye * scale));
    q.view_mut((n, 0), (n, n)).copy_from(&(w - v));
    q.view_mut((n, n), (n, n)).copy_from(&(eye - j));
    Ok(linalg::spectral_norm(&q))
}

/// Cumulative communication and gradient cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CommTally {
    pub entries: u64,
    pub rounds: u64,
    pub grad_evals: u64,
    pub epochs: f64,
}

impl CommTally {
    pub fn add(&mut self, report: &StepReport) {
        self.entries += report.comm_entries;
        self.rounds += report.comm_rounds;
        self.grad_evals += report.grad_evals;
        self.epochs += report.epoch_fraction;
    }
}

pub fn comm_tally<'a>(reports: impl IntoIterator<Item = &'a StepReport>) -> CommTally {
    let mut tally = CommTally::default();
    for r in reports {
        tally.add(r);
    }
    tally
}

/// One trace row. Metric fields are `None` when the induced mean could not
/// be formed (the average left the projection's uniqueness region).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub k: usize,
    pub epoch: f64,
    pub comm_entries_cum: u64,
    pub consensus_err: Option<f64>,
    pub grad_norm: Option<f64>,
    pub fval: Option<f64>,
    pub ds: Option<f64>,
}

impl MetricsRow {
    pub const HEADER: &'static str = "k,epoch,comm_entries_cum,consensus_err,grad_norm,fval,ds";

    /// Evaluates all metrics at the induced mean of `x`. On Euclidean
    /// problems `ds` is the plain distance to the known solution.
    pub fn measure(
        spec: &ManifoldSpec,
        problem: &dyn LocalObjectives,
        x: &AgentStack,
        k: usize,
        tally: &CommTally,
    ) -> Result<Self> {
        let mut row = Self {
            k,
            epoch: tally.epochs,
            comm_entries_cum: tally.entries,
            consensus_err: None,
            grad_norm: None,
            fval: None,
            ds: None,
        };
        let xbar = match induced_mean(spec, x) {
            Ok(m) => m,
            Err(Error::SingularProjection { .. }) => return Ok(row),
            Err(e) => return Err(e),
        };
        let g = problem.global_gradient(&xbar)?;
        row.consensus_err = Some(consensus_error(x, &xbar));
        row.grad_norm = Some(spec.riemannian_gradient(&xbar, &g)?.norm());
        row.fval = Some(problem.global_value(&xbar)?);
        row.ds = match (problem.ground_truth(), spec.kind()) {
            (None, _) => None,
            (Some(t), ManifoldKind::Stiefel) => Some(subspace_distance(&xbar, t)?),
            (Some(t), ManifoldKind::Euclidean) => Some((&xbar - t).norm()),
        };
        Ok(row)
    }

    /// CSV line without trailing newline. Unavailable metrics print as
    /// `singular`, a missing ground truth as an empty field.
    pub fn to_csv(&self) -> String {
        let metric =
            |v: Option<f64>| v.map_or_else(|| "singular".to_string(), |v| format!("{v:e}"));
        let mut out = String::new();
        let _ = write!(
            out,
            "{},{},{},{},{},{},",
            self.k,
            self.epoch,
            self.comm_entries_cum,
            metric(self.consensus_err),
            metric(self.grad_norm),
            metric(self.fval)
        );
        match (self.ds, self.grad_norm) {
            (Some(v), _) => {
                let _ = write!(out, "{v:e}");
            }
            (None, None) => out.push_str("singular"),
            (None, Some(_)) => {}
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian, stream_rng};
    use crate::problems::{generate_quadratic, generate_synthetic_pca, PcaSynthetic};
    use crate::topology::{build_graph, AuxiliaryMatrix, GraphKind, MixingMatrix};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn near_consensus(
        spec: &ManifoldSpec,
        n: usize,
        radius: f64,
        rng: &mut impl Rng,
    ) -> AgentStack {
        let c = spec.random_point(rng);
        AgentStack::new(
            (0..n)
                .map(|_| {
                    let u = gaussian(spec.rows(), spec.cols(), rng);
                    let scale = radius * rng.random::<f64>() / u.norm();
                    spec.project(&(&c + u * scale)).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn induced_mean_examples() {
        let st = ManifoldSpec::stiefel(5, 2).unwrap();
        let x = st.random_point(&mut stream_rng(0, 0));
        let stack = AgentStack::consensual(&x, 3);
        assert!((induced_mean(&st, &stack).unwrap() - &x).amax() < 1e-14);

        let eu = ManifoldSpec::euclidean(5, 2).unwrap();
        let mut rng = stream_rng(1, 0);
        let stack = AgentStack::new((0..4).map(|_| gaussian(5, 2, &mut rng)).collect()).unwrap();
        assert_eq!(induced_mean(&eu, &stack).unwrap(), stack.mean());
    }

    #[test]
    fn induced_mean_minimizes_squared_distances() {
        let st = ManifoldSpec::stiefel(6, 2).unwrap();
        let mut rng = stream_rng(2, 0);
        let x = near_consensus(&st, 5, 0.3, &mut rng);
        let xbar = induced_mean(&st, &x).unwrap();
        let cost = |y: &Mat| x.distance_to_common(y).powi(2);
        for _ in 0..200 {
            let y = st.random_point(&mut rng);
            assert!(cost(&xbar) <= cost(&y) + 1e-12);
            let nearby = st
                .project(&(&xbar + gaussian(6, 2, &mut rng) * 0.01))
                .unwrap();
            assert!(cost(&xbar) <= cost(&nearby) + 1e-12);
        }
    }

    #[test]
    fn stationarity_at_pca_ground_truth() {
        let params = PcaSynthetic {
            agents: 4,
            rows_per_agent: 100,
            ..PcaSynthetic::default()
        };
        let data = generate_synthetic_pca(&params, 3).unwrap();
        let spec = data.manifold();
        let stack = AgentStack::consensual(data.ground_truth().unwrap(), 4);
        let (ce, gn) = stationarity(&spec, &data, &stack).unwrap();
        assert!(ce <= 1e-24);
        assert!(gn <= 1e-8);

        let x = spec.random_point(&mut stream_rng(3, 1));
        let (ce, gn) = stationarity(&spec, &data, &AgentStack::consensual(&x, 4)).unwrap();
        let direct = spec
            .riemannian_gradient(&x, &data.global_gradient(&x).unwrap())
            .unwrap()
            .norm();
        assert!(ce <= 1e-24);
        assert!((gn - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn stationarity_at_quadratic_optimum() {
        let eu = ManifoldSpec::euclidean(3, 2).unwrap();
        let data = generate_quadratic(eu, 5, 0).unwrap();
        let stack = AgentStack::consensual(data.ground_truth().unwrap(), 5);
        let (ce, gn) = stationarity(&eu, &data, &stack).unwrap();
        assert_eq!(ce, 0.0);
        assert!(gn < 1e-15);
    }

    #[test]
    fn subspace_distance_examples() {
        let st = ManifoldSpec::stiefel(7, 3).unwrap();
        let mut rng = stream_rng(4, 0);
        let x = st.random_point(&mut rng);
        assert!(subspace_distance(&x, &x).unwrap() < 1e-14);
        let q = ManifoldSpec::stiefel(3, 3).unwrap().random_point(&mut rng);
        assert!(subspace_distance(&(&x * q), &x).unwrap() <= 1e-12);
        let e1 = dmatrix![1.0; 0.0];
        let e2 = dmatrix![0.0; 1.0];
        assert_abs_diff_eq!(
            subspace_distance(&e1, &e2).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        assert!(matches!(
            subspace_distance(&e1, &Mat::zeros(3, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn potential_examples() {
        let st = ManifoldSpec::stiefel(4, 2).unwrap();
        let mut rng = stream_rng(5, 0);
        let w = MixingMatrix::averaging(2).unwrap();
        let x = st.random_point(&mut rng);
        let pot = consensus_potential(&st, &AgentStack::consensual(&x, 2), w.matrix()).unwrap();
        assert_eq!(pot.phi, 0.0);
        assert!(pot.gradient.norm() < 1e-15);

        let y = st.random_point(&mut rng);
        let stack = AgentStack::new(vec![x.clone(), y.clone()]).unwrap();
        let pot = consensus_potential(&st, &stack, w.matrix()).unwrap();
        assert_abs_diff_eq!(pot.phi, 0.25 * (&x - &y).norm_squared(), epsilon = 1e-14);
    }

    #[test]
    fn potential_gradient_matches_finite_differences() {
        let eu = ManifoldSpec::euclidean(3, 2).unwrap();
        let mut rng = stream_rng(6, 0);
        let w =
            MixingMatrix::metropolis(&build_graph(GraphKind::ErdosRenyi { p: 0.6 }, 5, 1).unwrap())
                .unwrap();
        let x = AgentStack::new((0..5).map(|_| gaussian(3, 2, &mut rng)).collect()).unwrap();
        let pot = consensus_potential(&eu, &x, w.matrix()).unwrap();
        let h = 1e-5;
        for i in 0..5 {
            for (r, c) in [(0, 0), (1, 1), (2, 0)] {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus[i][(r, c)] += h;
                minus[i][(r, c)] -= h;
                let fd = (consensus_potential(&eu, &plus, w.matrix()).unwrap().phi
                    - consensus_potential(&eu, &minus, w.matrix()).unwrap().phi)
                    / (2.0 * h);
                assert!((fd - pot.gradient[i][(r, c)]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn euclidean_potential_gradients_sum_to_zero() {
        let eu = ManifoldSpec::euclidean(4, 2).unwrap();
        let mut rng = stream_rng(7, 0);
        let w = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 6, 0).unwrap()).unwrap();
        let x = AgentStack::new((0..6).map(|_| gaussian(4, 2, &mut rng)).collect()).unwrap();
        let (lhs, rhs) = consensus_gradient_bound_probe(&eu, &x, w.matrix()).unwrap();
        assert!(lhs < 1e-14);
        assert_eq!(rhs, 0.0);
    }

    #[test]
    fn bound_probes_hold_near_consensus() {
        let st = ManifoldSpec::stiefel(10, 5).unwrap();
        let mut rng = stream_rng(8, 0);
        for seed in 0..200 {
            let n = 4 + seed % 6;
            let g = build_graph(GraphKind::ErdosRenyi { p: 0.5 }, n, seed as u64).unwrap();
            let w = MixingMatrix::metropolis(&g).unwrap();
            let x = near_consensus(&st, n, 0.1, &mut rng);
            let (l, r) = consensus_gradient_bound_probe(&st, &x, w.matrix()).unwrap();
            assert!(l <= r + 1e-9);
            let (l, r) = mean_gap_probe(&st, &x).unwrap();
            assert!(l <= r + 1e-12);
            let (l, r) = potential_gradient_probe(&st, &x, w.matrix()).unwrap();
            assert!(l <= r + 1e-12);
        }
    }

    #[test]
    fn consensual_probes_are_zero() {
        let st = ManifoldSpec::stiefel(5, 2).unwrap();
        let w = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 4, 0).unwrap()).unwrap();
        let x = AgentStack::consensual(&st.random_point(&mut stream_rng(9, 0)), 4);
        let (l, r) = consensus_gradient_bound_probe(&st, &x, w.matrix()).unwrap();
        assert!(l < 1e-15 && r < 1e-28);
    }

    #[test]
    fn comm_tally_accumulates() {
        assert_eq!(comm_tally([]), CommTally::default());
        let step = StepReport {
            comm_entries: 60,
            comm_rounds: 1,
            grad_evals: 5,
            epoch_fraction: 1.0,
        };
        let t = comm_tally(&[step; 7]);
        assert_eq!((t.entries, t.rounds, t.grad_evals), (420, 7, 35));
        assert_eq!(t.epochs, 7.0);
    }

    #[test]
    fn recursion_norm_is_finite_and_positive() {
        let w = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 6, 0).unwrap()).unwrap();
        let v = AuxiliaryMatrix::new(&w, 0.5).unwrap();
        let nu = recursion_norm(w.matrix(), v.matrix(), 0.0).unwrap();
        assert!(nu.is_finite() && nu > 0.0);
        assert!(recursion_norm(w.matrix(), v.matrix(), 0.05).unwrap() > nu);
        assert!(recursion_norm(w.matrix(), v.matrix(), 0.4).is_err());
    }

    #[test]
    fn csv_row_layout() {
        let row = MetricsRow {
            k: 3,
            epoch: 3.0,
            comm_entries_cum: 120,
            consensus_err: Some(0.5),
            grad_norm: Some(1e-9),
            fval: Some(-2.0),
            ds: None,
        };
        assert_eq!(row.to_csv(), "3,3,120,5e-1,1e-9,-2e0,");
        let singular = MetricsRow {
            consensus_err: None,
            grad_norm: None,
            fval: None,
            ..row
        };
        assert_eq!(
            singular.to_csv(),
            "3,3,120,singular,singular,singular,singular"
        );
        assert_eq!(MetricsRow::HEADER.split(',').count(), 7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn subspace_distance_is_rotation_invariant(seed in any::<u64>()) {
            let st = ManifoldSpec::stiefel(8, 3).unwrap();
            let rot = ManifoldSpec::stiefel(3, 3).unwrap();
            let mut rng = stream_rng(seed, 0);
            let x = st.random_point(&mut rng);
            let y = st.random_point(&mut rng);
            let q = rot.random_point(&mut rng);
            let d = subspace_distance(&x, &y).unwrap();
            prop_assert!((subspace_distance(&(&x * &q), &y).unwrap() - d).abs() <= 1e-10);
            prop_assert!((subspace_distance(&x, &(&y * &q)).unwrap() - d).abs() <= 1e-10);
            prop_assert!((subspace_distance(&y, &x).unwrap() - d).abs() <= 1e-10);
        }

        #[test]
        fn subspace_distance_triangle_inequality(seed in any::<u64>()) {
            let st = ManifoldSpec::stiefel(6, 2).unwrap();
            let mut rng = stream_rng(seed, 1);
            let (a, b, c) = (st.random_point(&mut rng), st.random_point(&mut rng), st.random_point(&mut rng));
            let ab = subspace_distance(&a, &b).unwrap();
            let bc = subspace_distance(&b, &c).unwrap();
            let ac = subspace_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-10);
        }

        #[test]
        fn potential_gradient_bounded_by_twice_spread(seed in any::<u64>(), n in 2usize..9) {
            let st = ManifoldSpec::stiefel(5, 2).unwrap();
            let mut rng = stream_rng(seed, 2);
            let g = build_graph(GraphKind::ErdosRenyi { p: 0.6 }, n, seed).unwrap();
            let w = MixingMatrix::metropolis(&g).unwrap();
            let x = near_consensus(&st, n, 0.3, &mut rng);
            let (l, r) = potential_gradient_probe(&st, &x, w.matrix()).unwrap();
            prop_assert!(l <= r + 1e-12);
        }
    }
}
