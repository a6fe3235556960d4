//! Synchronous decentralized solvers over a simulated network.

mod baselines;
mod rextra;
mod run;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use baselines::{drdgd_step, gradient_tracking_step, DecentralizedGradient, GradientTracking};
pub use rextra::{Rextra, RextraState};
pub use run::{build_solver, initial_point, run, RunConfig, RunTrace, Termination};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::ManifoldSpec;
use crate::problems::LocalObjectives;
use crate::stack::AgentStack;
use crate::topology::MixingMatrix;

const SAMPLING_STREAM: u64 = 0x6261_7463_6800;

/// What one iteration cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Scalar entries sent over all directed links.
    pub comm_entries: u64,
    /// Mixing applications.
    pub comm_rounds: u64,
    /// Per-agent gradient oracle calls.
    pub grad_evals: u64,
    /// Fraction of one epoch of local data touched.
    pub epoch_fraction: f64,
}

impl StepReport {
    /// Cost of `rounds` mixing rounds, each sending `quantities` `d×r`
    /// matrices over every directed link.
    pub fn communication(
        mixing: &MixingMatrix,
        shape: (usize, usize),
        quantities: u64,
        rounds: u64,
    ) -> Self {
        let per_round = mixing.directed_links() as u64 * (shape.0 * shape.1) as u64 * quantities;
        Self {
            comm_entries: per_round * rounds,
            comm_rounds: rounds,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Rextra,
    /// REXTRA on the flattened (Euclidean) geometry.
    Extra,
    Drdgd,
    Dprgd,
    Drgta,
    Dprgt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Rextra,
        Algorithm::Extra,
        Algorithm::Drdgd,
        Algorithm::Dprgd,
        Algorithm::Drgta,
        Algorithm::Dprgt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rextra => "rextra",
            Algorithm::Extra => "extra",
            Algorithm::Drdgd => "drdgd",
            Algorithm::Dprgd => "dprgd",
            Algorithm::Drgta => "drgta",
            Algorithm::Dprgt => "dprgt",
        }
    }

    pub fn default_schedule(self) -> ScheduleKind {
        match self {
            Algorithm::Drdgd | Algorithm::Dprgd => ScheduleKind::Diminishing,
            _ => ScheduleKind::Constant,
        }
    }

    /// Matrices each agent sends per communication round.
    pub fn transmitted_quantities(self) -> u64 {
        match self {
            Algorithm::Drgta | Algorithm::Dprgt => 2,
            _ => 1,
        }
    }

    pub fn uses_t_rounds(self) -> bool {
        !matches!(self, Algorithm::Rextra | Algorithm::Extra)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    Constant,
    /// `α₀/√(k+1)`.
    Diminishing,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "diminishing" => Ok(ScheduleKind::Diminishing),
            other => Err(Error::InvalidArgument(format!(
                "unknown schedule {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Diminishing => "diminishing",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub alpha: f64,
}

impl Schedule {
    pub fn constant(alpha: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            alpha,
        }
    }

    pub fn diminishing(alpha: f64) -> Self {
        Self {
            kind: ScheduleKind::Diminishing,
            alpha,
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.alpha,
            ScheduleKind::Diminishing => self.alpha / ((k + 1) as f64).sqrt(),
        }
    }
}

/// How the consensus step is combined with the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusForm {
    /// `P(Σ_j W_ij x_j − α d_i)`.
    Projected,
    /// `P(x_i + P_{T_{x_i}}(Σ_j W_ij x_j − x_i) − α d_i)`.
    Retracted,
}

/// Per-agent Riemannian gradients, full-batch or minibatched.
#[derive(Debug, Clone)]
pub struct GradientOracle {
    spec: ManifoldSpec,
    batch: Option<usize>,
    rngs: Vec<ChaCha8Rng>,
}

impl GradientOracle {
    pub fn full(spec: ManifoldSpec) -> Self {
        Self {
            spec,
            batch: None,
            rngs: Vec::new(),
        }
    }

    /// Each agent draws `batch` local samples per call from its own stream.
    pub fn minibatch(spec: ManifoldSpec, agents: usize, batch: usize, seed: u64) -> Self {
        let rngs = (0..agents)
            .map(|i| linalg::stream_rng(seed, SAMPLING_STREAM + i as u64))
            .collect();
        Self {
            spec,
            batch: Some(batch),
            rngs,
        }
    }

    pub fn spec(&self) -> ManifoldSpec {
        self.spec
    }

    /// `grad f_i(x_i)` for every agent, and the mean data fraction touched.
    pub fn evaluate(
        &mut self,
        problem: &dyn LocalObjectives,
        x: &AgentStack,
    ) -> Result<(AgentStack, f64)> {
        let spec = self.spec;
        let n = x.agents();
        if problem.agents() != n {
            return Err(Error::InvalidArgument(format!(
                "stack has {n} agents, problem has {}",
                problem.agents()
            )));
        }
        let results: Vec<Result<(Mat, f64)>> = match self.batch {
            None => x
                .blocks()
                .par_iter()
                .enumerate()
                .map(|(i, xi)| {
                    let g = problem.local_gradient(i, xi)?;
                    Ok((spec.riemannian_gradient(xi, &g)?, 1.0))
                })
                .collect(),
            Some(batch) => self
                .rngs
                .par_iter_mut()
                .zip(x.blocks().par_iter())
                .enumerate()
                .map(|(i, (rng, xi))| {
                    let (g, frac) = problem.sampled_gradient(i, xi, batch, rng)?;
                    Ok((spec.riemannian_gradient(xi, &g)?, frac))
                })
                .collect(),
        };
        let mut grads = Vec::with_capacity(n);
        let mut touched = 0.0;
        for r in results {
            let (g, frac) = r?;
            grads.push(g);
            touched += frac;
        }
        Ok((AgentStack::new(grads)?, touched / n as f64))
    }
}

/// A solver advanced one synchronous round at a time.
pub trait Solver: Send {
    fn iterate(&self) -> &AgentStack;

    fn iteration(&self) -> usize;

    fn step(&mut self, problem: &dyn LocalObjectives) -> Result<StepReport>;

    /// `‖(1/n)Σ s_i + α(1/n)Σ g_i‖` for solvers carrying a correction
    /// variable.
    fn mean_tracking_residual(&self) -> Option<f64> {
        None
    }
}

pub(crate) fn check_feasible(spec: &ManifoldSpec, x: &AgentStack) -> Result<()> {
    Error::check_shape(spec.shape(), x.block_shape())?;
    for (agent, b) in x.iter().enumerate() {
        let residual = spec.feasibility_residual(b);
        if residual > 1e-10 {
            return Err(Error::InfeasibleStart { agent, residual });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sgd".parse::<Algorithm>().is_err());
    }

    #[test]
    fn diminishing_schedule() {
        let s = Schedule::diminishing(0.3);
        assert_eq!(s.at(0), 0.3);
        assert!((s.at(3) - 0.15).abs() < 1e-16);
        assert_eq!(Schedule::constant(0.3).at(99), 0.3);
    }
}
