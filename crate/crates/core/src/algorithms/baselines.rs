use super::{check_feasible, ConsensusForm, GradientOracle, Schedule, Solver, StepReport};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::manifold::ManifoldSpec;
use crate::problems::LocalObjectives;
use crate::stack::AgentStack;
use crate::topology::MixingMatrix;

/// `x_i⁺ = P(c_i − α d_i)` where `c_i` is the consensus point for `form`.
fn descend(
    spec: &ManifoldSpec,
    x: &AgentStack,
    mixed: &AgentStack,
    direction: &AgentStack,
    alpha: f64,
    form: ConsensusForm,
) -> Result<AgentStack> {
    AgentStack::new(
        (0..x.agents())
            .map(|i| {
                let base = match form {
                    ConsensusForm::Projected => mixed[i].clone(),
                    ConsensusForm::Retracted => {
                        &x[i] + spec.project_tangent(&x[i], &(&mixed[i] - &x[i]))?
                    }
                };
                spec.project(&(base - &direction[i] * alpha))
            })
            .collect::<Result<Vec<_>>>()?,
    )
}

/// One decentralized gradient step with `t_rounds` mixing rounds; `grads`
/// are the Riemannian gradients at `x`.
pub fn drdgd_step(
    spec: &ManifoldSpec,
    x: &AgentStack,
    grads: &AgentStack,
    w: &Mat,
    alpha_k: f64,
    t_rounds: usize,
    form: ConsensusForm,
) -> Result<AgentStack> {
    let mixed = x.mix_rounds(w, t_rounds);
    descend(spec, x, &mixed, grads, alpha_k, form)
}

/// One gradient-tracking step: moves along the tangent part of the tracker
/// `y`, then refreshes `y⁺ = W^t y + grad f(x⁺) − grad f(x)`. Returns the new
/// iterate, tracker and gradients.
#[allow(clippy::too_many_arguments)]
pub fn gradient_tracking_step(
    problem: &dyn LocalObjectives,
    oracle: &mut GradientOracle,
    x: &AgentStack,
    tracker: &AgentStack,
    grads: &AgentStack,
    w: &Mat,
    alpha: f64,
    t_rounds: usize,
    form: ConsensusForm,
) -> Result<(AgentStack, AgentStack, AgentStack, f64)> {
    let spec = oracle.spec();
    let mixed = x.mix_rounds(w, t_rounds);
    let direction = tracker.try_map(|i, y| spec.project_tangent(&x[i], y))?;
    let x_next = descend(&spec, x, &mixed, &direction, alpha, form)?;
    let (g_next, touched) = oracle.evaluate(problem, &x_next)?;
    let y_mixed = tracker.mix_rounds(w, t_rounds);
    let y_next = AgentStack::new(
        (0..x.agents())
            .map(|i| &y_mixed[i] + &g_next[i] - &grads[i])
            .collect(),
    )?;
    Ok((x_next, y_next, g_next, touched))
}

fn check_network(mixing: &MixingMatrix, x: &AgentStack, t_rounds: usize) -> Result<()> {
    if mixing.agents() != x.agents() {
        return Err(Error::InvalidArgument(format!(
            "mixing matrix has {} agents, stack has {}",
            mixing.agents(),
            x.agents()
        )));
    }
    if t_rounds == 0 {
        return Err(Error::InvalidArgument("t_rounds must be at least 1".into()));
    }
    Ok(())
}

/// DRDGD (retracted form) and DPRGD (projected form).
#[derive(Debug, Clone)]
pub struct DecentralizedGradient {
    x: AgentStack,
    w: Mat,
    schedule: Schedule,
    t_rounds: usize,
    form: ConsensusForm,
    oracle: GradientOracle,
    comm: StepReport,
    k: usize,
}

impl DecentralizedGradient {
    pub fn new(
        mixing: &MixingMatrix,
        x0: AgentStack,
        schedule: Schedule,
        t_rounds: usize,
        form: ConsensusForm,
        oracle: GradientOracle,
    ) -> Result<Self> {
        check_feasible(&oracle.spec(), &x0)?;
        check_network(mixing, &x0, t_rounds)?;
        let comm = StepReport::communication(mixing, oracle.spec().shape(), 1, t_rounds as u64);
        Ok(Self {
            x: x0,
            w: mixing.matrix().clone(),
            schedule,
            t_rounds,
            form,
            oracle,
            comm,
            k: 0,
        })
    }
}

impl Solver for DecentralizedGradient {
    fn iterate(&self) -> &AgentStack {
        &self.x
    }

    fn iteration(&self) -> usize {
        self.k
    }

    fn step(&mut self, problem: &dyn LocalObjectives) -> Result<StepReport> {
        let (grads, touched) = self.oracle.evaluate(problem, &self.x)?;
        let alpha = self.schedule.at(self.k);
        self.x = drdgd_step(
            &self.oracle.spec(),
            &self.x,
            &grads,
            &self.w,
            alpha,
            self.t_rounds,
            self.form,
        )?;
        self.k += 1;
        Ok(StepReport {
            grad_evals: self.x.agents() as u64,
            epoch_fraction: touched,
            ..self.comm
        })
    }
}

/// DRGTA (retracted form) and DPRGT (projected form).
#[derive(Debug, Clone)]
pub struct GradientTracking {
    x: AgentStack,
    y: AgentStack,
    g: AgentStack,
    w: Mat,
    alpha: f64,
    t_rounds: usize,
    form: ConsensusForm,
    oracle: GradientOracle,
    comm: StepReport,
    k: usize,
}

impl GradientTracking {
    /// The tracker starts at `grad f(x₀)`.
    pub fn new(
        problem: &dyn LocalObjectives,
        mixing: &MixingMatrix,
        x0: AgentStack,
        alpha: f64,
        t_rounds: usize,
        form: ConsensusForm,
        mut oracle: GradientOracle,
    ) -> Result<Self> {
        check_feasible(&oracle.spec(), &x0)?;
        check_network(mixing, &x0, t_rounds)?;
        let (g, _) = oracle.evaluate(problem, &x0)?;
        let comm = StepReport::communication(mixing, oracle.spec().shape(), 2, t_rounds as u64);
        Ok(Self {
            x: x0,
            y: g.clone(),
            g,
            w: mixing.matrix().clone(),
            alpha,
            t_rounds,
            form,
            oracle,
            comm,
            k: 0,
        })
    }

    pub fn tracker(&self) -> &AgentStack {
        &self.y
    }

    pub fn gradients(&self) -> &AgentStack {
        &self.g
    }
}

impl Solver for GradientTracking {
    fn iterate(&self) -> &AgentStack {
        &self.x
    }

    fn iteration(&self) -> usize {
        self.k
    }

    fn step(&mut self, problem: &dyn LocalObjectives) -> Result<StepReport> {
        let (x, y, g, touched) = gradient_tracking_step(
            problem,
            &mut self.oracle,
            &self.x,
            &self.y,
            &self.g,
            &self.w,
            self.alpha,
            self.t_rounds,
            self.form,
        )?;
        self.x = x;
        self.y = y;
        self.g = g;
        self.k += 1;
        Ok(StepReport {
            grad_evals: self.x.agents() as u64,
            epoch_fraction: touched,
            ..self.comm
        })
    }
}
