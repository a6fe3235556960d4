//! Randomized sweeps of the geometric, mixing and consensus inequalities,
//! reported as pass/fail rows.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{
    consensus_gradient_bound_probe, mean_gap_probe, potential_gradient_probe,
};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::manifold::ManifoldSpec;
use crate::stack::AgentStack;
use crate::topology::{build_graph, GraphKind, MixingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Manifold,
    Mixing,
    Lemmas,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manifold" => Ok(Suite::Manifold),
            "mixing" => Ok(Suite::Mixing),
            "lemmas" => Ok(Suite::Lemmas),
            other => Err(Error::InvalidArgument(format!(
                "unknown probe suite {other:?}"
            ))),
        }
    }
}

/// One probe: the worst observed value against its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCheck {
    pub name: &'static str,
    pub samples: usize,
    pub worst: f64,
    pub bound: f64,
    pub passed: bool,
}

impl ProbeCheck {
    fn at_most(name: &'static str, samples: usize, worst: f64, bound: f64) -> Self {
        Self {
            name,
            samples,
            worst,
            bound,
            passed: worst <= bound,
        }
    }
}

impl fmt::Display for ProbeCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<40} samples={:<6} worst={:<12.6e} bound={:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.samples,
            self.worst,
            self.bound
        )
    }
}

pub const PROBE_STREAM: u64 = 0x7072_6f62;

/// A point within Frobenius distance `radius` of `center`, in a uniformly
/// random direction with uniformly random length.
fn perturb(center: &Mat, radius: f64, rng: &mut ChaCha8Rng) -> Mat {
    let u = linalg::gaussian(center.nrows(), center.ncols(), rng);
    let scale = radius * rng.random::<f64>() / u.norm();
    center + u * scale
}

/// Blocks on the manifold, each the projection of a point within `radius` of
/// a shared random point.
pub fn near_consensus_stack(
    spec: &ManifoldSpec,
    agents: usize,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AgentStack> {
    let c = spec.random_point(rng);
    let blocks = (0..agents)
        .map(|_| spec.project(&perturb(&c, radius, rng)))
        .collect::<Result<Vec<_>>>()?;
    AgentStack::new(blocks)
}

/// Projection Lipschitz ratio in the `τ = 0.25` tube and the second-order
/// projection ratio for `‖u‖ ≤ 0.5`, on St(10, 5).
pub fn manifold_suite(samples: usize, seed: u64) -> Result<Vec<ProbeCheck>> {
    let st = ManifoldSpec::stiefel(10, 5)?;
    let mut rng = linalg::stream_rng(seed, PROBE_STREAM);
    let tau = 0.25;
    let radius = st.proximal_radius();
    let mut lipschitz: f64 = 0.0;
    let mut quadratic: f64 = 0.0;
    let mut feasibility: f64 = 0.0;
    let mut idempotence: f64 = 0.0;
    let mut tangent_sym: f64 = 0.0;
    for _ in 0..samples {
        let c = st.random_point(&mut rng);
        let x = perturb(&c, tau, &mut rng);
        let y = perturb(&c, tau, &mut rng);
        lipschitz = lipschitz.max(st.lipschitz_projection_ratio(&x, &y, tau)?);

        let u = perturb(&Mat::zeros(10, 5), 0.5, &mut rng);
        quadratic = quadratic.max(st.quadratic_projection_ratio(&c, &u)?);

        let p = st.project(&x)?;
        feasibility = feasibility.max(st.feasibility_residual(&p));
        idempotence = idempotence.max((st.project(&p)? - &p).norm());
        let v = st.project_tangent(&c, &linalg::gaussian(10, 5, &mut rng))?;
        tangent_sym = tangent_sym.max(linalg::sym(&(c.transpose() * v)).norm());
    }
    Ok(vec![
        ProbeCheck::at_most(
            "projection lipschitz ratio (tau=0.25)",
            samples,
            lipschitz,
            radius / (radius - tau) + 1e-9,
        ),
        ProbeCheck::at_most("quadratic projection ratio", samples, quadratic, 10.0),
        ProbeCheck::at_most("projection feasibility", samples, feasibility, 1e-12),
        ProbeCheck::at_most("projection idempotence", samples, idempotence, 1e-12),
        ProbeCheck::at_most("tangent vector symmetry", samples, tangent_sym, 1e-12),
    ])
}

/// Metropolis matrices on random connected Erdős–Rényi graphs, plus the
/// ring-3 and ring-4 closed forms.
pub fn mixing_suite(samples: usize, seed: u64) -> Result<Vec<ProbeCheck>> {
    let mut rng = linalg::stream_rng(seed, PROBE_STREAM);
    let mut failures = 0usize;
    for i in 0..samples {
        let n = rng.random_range(4..=16);
        let p = if i % 2 == 0 { 0.3 } else { 0.6 };
        let g = build_graph(GraphKind::ErdosRenyi { p }, n, rng.random())?;
        let w = MixingMatrix::metropolis(&g)?;
        if !w.validate().all_passed() {
            failures += 1;
        }
    }
    let ring3 = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 3, 0)?)?;
    let ring3_dev = ring3
        .matrix()
        .iter()
        .map(|v| (v - 1.0 / 3.0).abs())
        .fold(0.0, f64::max);
    let ring4 = MixingMatrix::metropolis(&build_graph(GraphKind::Ring, 4, 0)?)?;
    Ok(vec![
        ProbeCheck::at_most(
            "metropolis assumption checks (failures)",
            samples,
            failures as f64,
            0.0,
        ),
        ProbeCheck::at_most("ring-3 weights deviation from 1/3", 1, ring3_dev, 1e-15),
        ProbeCheck::at_most("ring-3 sigma2", 1, ring3.sigma2(), 1e-12),
        ProbeCheck::at_most(
            "ring-4 sigma2 deviation from 1/3",
            1,
            (ring4.sigma2() - 1.0 / 3.0).abs(),
            1e-12,
        ),
    ])
}

/// Induced-mean gap, consensus-gradient and potential-gradient bounds on
/// near-consensus stacks on St(10, 5).
pub fn lemma_suite(samples: usize, seed: u64) -> Result<Vec<ProbeCheck>> {
    let st = ManifoldSpec::stiefel(10, 5)?;
    let mut rng = linalg::stream_rng(seed, PROBE_STREAM);
    // Worst value of lhs − rhs for each inequality.
    let mut mean_gap = f64::NEG_INFINITY;
    let mut grad_sum = f64::NEG_INFINITY;
    let mut potential = f64::NEG_INFINITY;
    for _ in 0..samples {
        let n = rng.random_range(4..=12);
        let g = build_graph(GraphKind::ErdosRenyi { p: 0.5 }, n, rng.random())?;
        let w = MixingMatrix::metropolis(&g)?;
        let x = near_consensus_stack(&st, n, 0.1, &mut rng)?;
        let (l, r) = mean_gap_probe(&st, &x)?;
        mean_gap = mean_gap.max(l - r);
        let (l, r) = consensus_gradient_bound_probe(&st, &x, w.matrix())?;
        grad_sum = grad_sum.max(l - r);
        let (l, r) = potential_gradient_probe(&st, &x, w.matrix())?;
        potential = potential.max(l - r);
    }
    Ok(vec![
        ProbeCheck::at_most(
            "mean gap minus 2sqrt(r)|x-xbar|^2/n",
            samples,
            mean_gap,
            1e-12,
        ),
        ProbeCheck::at_most(
            "|sum grad phi| minus 4sqrt(n)|x-xbar|^2",
            samples,
            grad_sum,
            1e-9,
        ),
        ProbeCheck::at_most("|grad phi| minus 2|x-xbar|", samples, potential, 1e-12),
    ])
}

pub fn run_suite(suite: Suite, samples: usize, seed: u64) -> Result<Vec<ProbeCheck>> {
    match suite {
        Suite::Manifold => manifold_suite(samples, seed),
        Suite::Mixing => mixing_suite(samples, seed),
        Suite::Lemmas => lemma_suite(samples, seed),
    }
}
