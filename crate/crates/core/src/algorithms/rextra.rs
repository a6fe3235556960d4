use super::{check_feasible, GradientOracle, Solver, StepReport};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::problems::LocalObjectives;
use crate::stack::AgentStack;
use crate::topology::{AuxiliaryMatrix, MixingMatrix};

/// Iterate `x`, correction `s` and cached gradients `g = grad f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RextraState {
    pub x: AgentStack,
    pub s: AgentStack,
    pub g: AgentStack,
    pub k: usize,
    pub alpha: f64,
}

impl RextraState {
    /// `s₀ = −α grad f(x₀)`.
    pub fn init(
        problem: &dyn LocalObjectives,
        oracle: &mut GradientOracle,
        x0: AgentStack,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size {alpha} must be positive"
            )));
        }
        check_feasible(&oracle.spec(), &x0)?;
        let (g, _) = oracle.evaluate(problem, &x0)?;
        let s = g.map(|_, gi| gi * -alpha);
        Ok(Self {
            x: x0,
            s,
            g,
            k: 0,
            alpha,
        })
    }

    /// `x⁺ = P(W x + s)`, `s⁺ = (W − V) x + s − α(grad f(x⁺) − grad f(x))`.
    pub fn step(
        &mut self,
        problem: &dyn LocalObjectives,
        w: &Mat,
        w_minus_v: &Mat,
        oracle: &mut GradientOracle,
    ) -> Result<f64> {
        let spec = oracle.spec();
        let mixed = self.x.mix(w);
        let x_next = mixed
            .zip_map(&self.s, |wx, s| wx + s)
            .try_map(|_, y| spec.project(y))?;
        let correction = self.x.mix(w_minus_v);
        let (g_next, touched) = oracle.evaluate(problem, &x_next)?;
        let alpha = self.alpha;
        let s_next = AgentStack::new(
            (0..self.x.agents())
                .map(|i| &correction[i] + &self.s[i] - (&g_next[i] - &self.g[i]) * alpha)
                .collect(),
        )?;
        self.x = x_next;
        self.s = s_next;
        self.g = g_next;
        self.k += 1;
        Ok(touched)
    }

    pub fn mean_tracking_residual(&self) -> f64 {
        (self.s.mean() + self.g.mean() * self.alpha).norm()
    }
}

/// REXTRA bound to a network. With a flattened oracle it is classic EXTRA.
#[derive(Debug, Clone)]
pub struct Rextra {
    state: RextraState,
    w: Mat,
    w_minus_v: Mat,
    oracle: GradientOracle,
    comm: StepReport,
}

impl Rextra {
    pub fn new(
        problem: &dyn LocalObjectives,
        mixing: &MixingMatrix,
        aux: &AuxiliaryMatrix,
        x0: AgentStack,
        alpha: f64,
        mut oracle: GradientOracle,
    ) -> Result<Self> {
        let state = RextraState::init(problem, &mut oracle, x0, alpha)?;
        if mixing.agents() != state.x.agents() {
            return Err(Error::InvalidArgument(format!(
                "mixing matrix has {} agents, stack has {}",
                mixing.agents(),
                state.x.agents()
            )));
        }
        let comm = StepReport::communication(mixing, oracle.spec().shape(), 1, 1);
        Ok(Self {
            w: mixing.matrix().clone(),
            w_minus_v: mixing.matrix() - aux.matrix(),
            comm,
            state,
            oracle,
        })
    }

    pub fn state(&self) -> &RextraState {
        &self.state
    }
}

impl Solver for Rextra {
    fn iterate(&self) -> &AgentStack {
        &self.state.x
    }

    fn iteration(&self) -> usize {
        self.state.k
    }

    fn step(&mut self, problem: &dyn LocalObjectives) -> Result<StepReport> {
        let touched = self
            .state
            .step(problem, &self.w, &self.w_minus_v, &mut self.oracle)?;
        Ok(StepReport {
            grad_evals: self.state.x.agents() as u64,
            epoch_fraction: touched,
            ..self.comm
        })
    }

    fn mean_tracking_residual(&self) -> Option<f64> {
        Some(self.state.mean_tracking_residual())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::stream_rng;
    use crate::manifold::ManifoldSpec;
    use crate::problems::{generate_quadratic, generate_synthetic_pca, PcaSynthetic};
    use crate::topology::{build_graph, GraphKind, DEFAULT_THETA};

    fn pca_setup(n: usize) -> (crate::problems::PcaData, MixingMatrix, AuxiliaryMatrix) {
        let params = PcaSynthetic {
            agents: n,
            rows_per_agent: 50,
            dim: 6,
            rank: 2,
            ..PcaSynthetic::default()
        };
        let data = generate_synthetic_pca(&params, 1).unwrap();
        let w = if n == 1 {
            MixingMatrix::averaging(1).unwrap()
        } else {
            MixingMatrix::metropolis(&build_graph(GraphKind::Ring, n, 0).unwrap()).unwrap()
        };
        let v = AuxiliaryMatrix::new(&w, DEFAULT_THETA).unwrap();
        (data, w, v)
    }

    #[test]
    fn initial_correction_is_scaled_gradient() {
        let (data, w, v) = pca_setup(1);
        let spec = data.manifold();
        let x0 = spec.random_point(&mut stream_rng(0, 0));
        let solver = Rextra::new(
            &data,
            &w,
            &v,
            AgentStack::consensual(&x0, 1),
            0.01,
            GradientOracle::full(spec),
        )
        .unwrap();
        let g = spec
            .riemannian_gradient(&x0, &data.local_gradient(0, &x0).unwrap())
            .unwrap();
        assert!((&solver.state().s[0] + g * 0.01).amax() < 1e-15);
    }

    #[test]
    fn single_agent_step_by_hand() {
        let (data, w, v) = pca_setup(1);
        let spec = data.manifold();
        let alpha = 0.005;
        let x0 = spec.random_point(&mut stream_rng(1, 0));
        let mut solver = Rextra::new(
            &data,
            &w,
            &v,
            AgentStack::consensual(&x0, 1),
            alpha,
            GradientOracle::full(spec),
        )
        .unwrap();
        solver.step(&data).unwrap();
        let rg = |x: &Mat| {
            spec.riemannian_gradient(x, &data.local_gradient(0, x).unwrap())
                .unwrap()
        };
        let x1 = spec.project(&(&x0 - rg(&x0) * alpha)).unwrap();
        assert!((&solver.state().x[0] - &x1).amax() < 1e-12);
        assert!((&solver.state().s[0] + rg(&x1) * alpha).amax() < 1e-12);
    }

    #[test]
    fn rejects_off_manifold_start() {
        let (data, w, v) = pca_setup(4);
        let spec = data.manifold();
        let x0 = spec.random_point(&mut stream_rng(2, 0)) * 1.01;
        let err = Rextra::new(
            &data,
            &w,
            &v,
            AgentStack::consensual(&x0, 4),
            0.01,
            GradientOracle::full(spec),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleStart { agent: 0, .. }));
    }

    #[test]
    fn mean_tracking_identity_holds() {
        let (data, w, v) = pca_setup(4);
        let spec = data.manifold();
        let x0 = spec.random_point(&mut stream_rng(3, 0));
        let mut solver = Rextra::new(
            &data,
            &w,
            &v,
            AgentStack::consensual(&x0, 4),
            0.01,
            GradientOracle::full(spec),
        )
        .unwrap();
        assert!(solver.mean_tracking_residual().unwrap() < 1e-14);
        for _ in 0..100 {
            solver.step(&data).unwrap();
            assert!(solver.mean_tracking_residual().unwrap() < 1e-10);
            assert!(solver
                .iterate()
                .iter()
                .all(|b| spec.feasibility_residual(b) < 1e-12));
        }
    }

    #[test]
    fn stationary_consensual_start_has_zero_mean_correction() {
        let (data, w, v) = pca_setup(4);
        let spec = data.manifold();
        let x_star = data.ground_truth().unwrap().clone();
        let solver = Rextra::new(
            &data,
            &w,
            &v,
            AgentStack::consensual(&x_star, 4),
            0.01,
            GradientOracle::full(spec),
        )
        .unwrap();
        assert!(solver.state().s.mean().norm() < 1e-10);
    }

    #[test]
    fn reports_one_round_of_one_quantity() {
        let m = ManifoldSpec::euclidean(3, 2).unwrap();
        let data = generate_quadratic(m, 5, 0).unwrap();
        let w = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 5, 0).unwrap()).unwrap();
        let v = AuxiliaryMatrix::new(&w, 0.5).unwrap();
        let mut solver = Rextra::new(
            &data,
            &w,
            &v,
            AgentStack::zeros(5, 3, 2),
            0.1,
            GradientOracle::full(m),
        )
        .unwrap();
        let report = solver.step(&data).unwrap();
        assert_eq!(report.comm_rounds, 1);
        assert_eq!(report.comm_entries, 10 * 6);
        assert_eq!(report.grad_evals, 5);
        assert_eq!(report.epoch_fraction, 1.0);
    }
}
