use std::fmt;

use super::{
    Algorithm, ConsensusForm, DecentralizedGradient, GradientOracle, GradientTracking, Rextra,
    Schedule, ScheduleKind, Solver,
};
use crate::diagnostics::{CommTally, MetricsRow};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::ManifoldSpec;
use crate::problems::LocalObjectives;
use crate::stack::AgentStack;
use crate::topology::{AuxiliaryMatrix, MixingMatrix, DEFAULT_THETA};

const INIT_STREAM: u64 = 0x696e_6974;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub alpha: f64,
    /// `None` picks the algorithm's default schedule.
    pub schedule: Option<ScheduleKind>,
    pub theta: f64,
    pub t_rounds: usize,
    pub max_epochs: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Per-agent minibatch size; `None` for full gradients.
    pub batch: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Rextra,
            alpha: 1e-3,
            schedule: None,
            theta: DEFAULT_THETA,
            t_rounds: 1,
            max_epochs: 2000,
            grad_tol: 1e-8,
            seed: 0,
            batch: None,
        }
    }
}

impl RunConfig {
    pub fn schedule(&self) -> Schedule {
        Schedule {
            kind: self.schedule.unwrap_or(self.algorithm.default_schedule()),
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxEpochs,
    Failed(String),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged => f.write_str("converged"),
            Termination::MaxEpochs => f.write_str("max_epochs"),
            Termination::Failed(reason) => write!(f, "failed: {reason}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub rows: Vec<MetricsRow>,
    pub termination: Termination,
    /// Largest mean-tracking residual seen, for solvers that carry one.
    pub max_mean_tracking_residual: Option<f64>,
    pub final_iterate: AgentStack,
}

impl RunTrace {
    pub fn last(&self) -> &MetricsRow {
        self.rows
            .last()
            .expect("a trace always holds the initial row")
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(MetricsRow::HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv());
            out.push('\n');
        }
        out
    }
}

/// The consensual start: one random manifold point drawn from `seed`,
/// copied to every agent.
pub fn initial_point(spec: &ManifoldSpec, agents: usize, seed: u64) -> AgentStack {
    let mut rng = linalg::stream_rng(seed, INIT_STREAM);
    let x: Mat = spec.random_point(&mut rng);
    AgentStack::consensual(&x, agents)
}

/// The solver named by `config`, started at `x0`. EXTRA runs on the
/// flattened manifold.
pub fn build_solver(
    problem: &dyn LocalObjectives,
    mixing: &MixingMatrix,
    config: &RunConfig,
    x0: AgentStack,
) -> Result<Box<dyn Solver>> {
    let base = problem.manifold();
    let spec = match config.algorithm {
        Algorithm::Extra => base.flattened(),
        _ => base,
    };
    let oracle = match config.batch {
        Some(b) => GradientOracle::minibatch(spec, problem.agents(), b, config.seed),
        None => GradientOracle::full(spec),
    };
    let alpha = config.alpha;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size {alpha} must be positive"
        )));
    }
    let form = match config.algorithm {
        Algorithm::Drdgd | Algorithm::Drgta => ConsensusForm::Retracted,
        _ => ConsensusForm::Projected,
    };
    Ok(match config.algorithm {
        Algorithm::Rextra | Algorithm::Extra => {
            if config.schedule == Some(ScheduleKind::Diminishing) {
                return Err(Error::InvalidArgument(format!(
                    "{} needs a constant step size",
                    config.algorithm
                )));
            }
            let aux = AuxiliaryMatrix::new(mixing, config.theta)?;
            Box::new(Rextra::new(problem, mixing, &aux, x0, alpha, oracle)?)
        }
        Algorithm::Drdgd | Algorithm::Dprgd => Box::new(DecentralizedGradient::new(
            mixing,
            x0,
            config.schedule(),
            config.t_rounds,
            form,
            oracle,
        )?),
        Algorithm::Drgta | Algorithm::Dprgt => {
            if config.schedule == Some(ScheduleKind::Diminishing) {
                return Err(Error::InvalidArgument(format!(
                    "{} needs a constant step size",
                    config.algorithm
                )));
            }
            Box::new(GradientTracking::new(
                problem,
                mixing,
                x0,
                alpha,
                config.t_rounds,
                form,
                oracle,
            )?)
        }
    })
}

/// Runs `config.algorithm` from the seeded consensual start (or `x0`) until
/// `‖grad f(x̄)‖ < grad_tol`, the epoch budget is spent, or a step fails.
/// Setup errors are returned; failures during iteration end up in
/// [`RunTrace::termination`].
pub fn run(
    problem: &dyn LocalObjectives,
    mixing: &MixingMatrix,
    config: &RunConfig,
    x0: Option<AgentStack>,
) -> Result<RunTrace> {
    let spec = problem.manifold();
    let metric_spec = match config.algorithm {
        Algorithm::Extra => spec.flattened(),
        _ => spec,
    };
    let x0 = x0.unwrap_or_else(|| initial_point(&spec, problem.agents(), config.seed));
    let mut solver = build_solver(problem, mixing, config, x0)?;

    let mut tally = CommTally::default();
    let mut rows = vec![MetricsRow::measure(
        &metric_spec,
        problem,
        solver.iterate(),
        0,
        &tally,
    )?];
    let mut max_residual = solver.mean_tracking_residual();
    let converged = |row: &MetricsRow| row.grad_norm.is_some_and(|g| g < config.grad_tol);

    let mut termination = if converged(&rows[0]) {
        Termination::Converged
    } else {
        Termination::MaxEpochs
    };
    let budget = config.max_epochs as f64 - 1e-9;
    while termination == Termination::MaxEpochs && tally.epochs < budget {
        let report = match solver.step(problem) {
            Ok(r) => r,
            Err(e) => {
                termination = Termination::Failed(e.to_string());
                break;
            }
        };
        tally.add(&report);
        if !solver.iterate().is_finite() {
            termination = Termination::Failed("iterate became non-finite".into());
            break;
        }
        if let (Some(m), Some(r)) = (max_residual, solver.mean_tracking_residual()) {
            max_residual = Some(m.max(r));
        }
        let row = MetricsRow::measure(
            &metric_spec,
            problem,
            solver.iterate(),
            solver.iteration(),
            &tally,
        );
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                termination = Termination::Failed(e.to_string());
                break;
            }
        };
        let done = converged(&row);
        rows.push(row);
        if done {
            termination = Termination::Converged;
        }
    }

    Ok(RunTrace {
        algorithm: config.algorithm,
        alpha: config.alpha,
        rows,
        termination,
        max_mean_tracking_residual: max_residual,
        final_iterate: solver.iterate().clone(),
    })
}
