//! Communication graphs, Metropolis mixing matrices and their validation.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

const GRAPH_STREAM: u64 = 0x0067_7261_7068;
/// Maximum number of Erdos-Renyi draws before giving up on connectivity.
pub const MAX_ER_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    ErdosRenyi { p: f64 },
    Ring,
    Complete,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::ErdosRenyi { p } => write!(f, "er({p})"),
            GraphKind::Ring => f.write_str("ring"),
            GraphKind::Complete => f.write_str("complete"),
        }
    }
}

/// Undirected simple graph over agents `0..n`. Edges are stored once as
/// `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    /// Number of rejected Erdos-Renyi draws before a connected one was found.
    pub resamples: usize,
}

impl Graph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "graph needs at least one node".into(),
            ));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self {
            n,
            edges: set,
            resamples: 0,
        })
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    /// Edge-list text: `n m` on the first line, then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(i, j) in &self.edges {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (row, header) = lines.next().ok_or(Error::Parse {
            row: 1,
            column: 1,
            message: "missing 'n m' header".into(),
        })?;
        let [n, m] = parse_pair(row, header)?;
        let mut edges = Vec::with_capacity(m);
        for (row, line) in lines {
            edges.push(parse_pair(row, line).map(|[i, j]| (i, j))?);
        }
        if edges.len() != m {
            return Err(Error::Shape(format!(
                "header announces {m} edges, found {}",
                edges.len()
            )));
        }
        let g = Self::from_edges(n, edges)?;
        if g.edge_count() != m {
            return Err(Error::Shape("edge list contains duplicate edges".into()));
        }
        Ok(g)
    }
}

fn parse_pair(row: usize, line: &str) -> Result<[usize; 2]> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(Error::Parse {
            row,
            column: 1,
            message: format!("expected two integers, found {} fields", fields.len()),
        });
    }
    let mut out = [0; 2];
    for (k, field) in fields.iter().enumerate() {
        out[k] = field.parse().map_err(|_| Error::Parse {
            row,
            column: k + 1,
            message: format!("'{field}' is not a non-negative integer"),
        })?;
    }
    Ok(out)
}

/// Deterministic graph for `(kind, n, seed)`. Erdos-Renyi graphs are redrawn
/// until connected, which samples the ER law conditioned on connectivity.
pub fn build_graph(kind: GraphKind, n: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "graph needs at least one node".into(),
        ));
    }
    let graph = match kind {
        GraphKind::Ring => {
            Graph::from_edges(n, (0..n).filter(|_| n > 1).map(|i| (i, (i + 1) % n)))?
        }
        GraphKind::Complete => {
            Graph::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))?
        }
        GraphKind::ErdosRenyi { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "edge probability {p} outside (0, 1]"
                )));
            }
            let mut rng = linalg::stream_rng(seed, GRAPH_STREAM);
            let mut found = None;
            for attempt in 0..MAX_ER_DRAWS {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                let mut g = Graph::from_edges(n, edges)?;
                if g.is_connected() {
                    g.resamples = attempt;
                    found = Some(g);
                    break;
                }
            }
            found.ok_or(Error::RetryExhausted {
                attempts: MAX_ER_DRAWS,
            })?
        }
    };
    if !graph.is_connected() {
        return Err(Error::Disconnected { n });
    }
    Ok(graph)
}

/// Symmetric doubly-stochastic mixing matrix with its spectral summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: Mat,
    sigma2: f64,
    eig_min: f64,
    eig_max: f64,
}

impl MixingMatrix {
    /// Wraps an arbitrary square matrix; no invariant is enforced here, use
    /// [`MixingMatrix::validate`] to check them.
    pub fn from_matrix(w: Mat) -> Result<Self> {
        if !w.is_square() || w.nrows() == 0 {
            return Err(Error::Shape(format!(
                "mixing matrix must be square and non-empty, got {:?}",
                w.shape()
            )));
        }
        let sym = linalg::sym(&w);
        let ev = linalg::sym_eigenvalues(&sym);
        let mut sv: Vec<f64> = ev.iter().map(|v| v.abs()).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let sigma2 = sv.get(1).copied().unwrap_or(0.0);
        Ok(Self {
            sigma2,
            eig_min: *ev.last().unwrap(),
            eig_max: ev[0],
            w,
        })
    }

    /// Metropolis constant edge weights
    /// `W_ij = 1 / (1 + max(deg_i, deg_j))` on edges, remaining mass on the
    /// diagonal.
    pub fn metropolis(graph: &Graph) -> Result<Self> {
        if !graph.is_connected() {
            return Err(Error::Disconnected { n: graph.nodes() });
        }
        let n = graph.nodes();
        let deg = graph.degrees();
        let mut w = Mat::zeros(n, n);
        for (i, j) in graph.edges() {
            let weight = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
            w[(i, i)] = 1.0 - off;
        }
        Self::from_matrix(w)
    }

    /// The exact averaging matrix `J = 11ᵀ/n`.
    pub fn averaging(n: usize) -> Result<Self> {
        Self::from_matrix(Mat::from_element(n, n, 1.0 / n as f64))
    }

    pub fn matrix(&self) -> &Mat {
        &self.w
    }

    pub fn agents(&self) -> usize {
        self.w.nrows()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn eig_min(&self) -> f64 {
        self.eig_min
    }

    pub fn eig_max(&self) -> f64 {
        self.eig_max
    }

    /// Number of ordered pairs `(i, j)`, `i ≠ j`, with `W_ij ≠ 0`; each one
    /// carries one message per communication round.
    pub fn directed_links(&self) -> usize {
        let n = self.agents();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.w[(i, j)] != 0.0)
            .count()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_mixing(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// The worst observed value for the quantity under test.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const ROW_SUM_TOL: f64 = 1e-12;
pub const SPECTRAL_GAP_TOL: f64 = 1e-10;

/// Checks every connectivity/mixing assumption and reports each one.
pub fn validate_mixing(mixing: &MixingMatrix) -> ValidationReport {
    let w = mixing.matrix();
    let n = w.nrows();
    let asym = (w - w.transpose()).amax();
    let min_entry = w.iter().copied().fold(f64::INFINITY, f64::min);
    let diag: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    let diag_min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let diag_max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let row_err = (0..n)
        .map(|i| (w.row(i).sum() - 1.0).abs())
        .fold(0.0, f64::max);

    let checks = vec![
        Check {
            name: "symmetric",
            passed: asym <= SYMMETRY_TOL,
            value: asym,
        },
        Check {
            name: "nonnegative",
            passed: min_entry >= 0.0,
            value: min_entry,
        },
        Check {
            name: "diagonal_positive",
            passed: diag_min > 0.0,
            value: diag_min,
        },
        Check {
            name: "diagonal_below_one",
            passed: diag_max < 1.0,
            value: diag_max,
        },
        Check {
            name: "row_sums",
            passed: row_err <= ROW_SUM_TOL,
            value: row_err,
        },
        Check {
            name: "eigenvalues_above_minus_one",
            passed: mixing.eig_min() > -1.0,
            value: mixing.eig_min(),
        },
        Check {
            name: "eigenvalues_at_most_one",
            passed: mixing.eig_max() <= 1.0 + SYMMETRY_TOL,
            value: mixing.eig_max(),
        },
        Check {
            name: "sigma2_below_one",
            passed: mixing.sigma2() < 1.0 - SPECTRAL_GAP_TOL,
            value: mixing.sigma2(),
        },
    ];
    ValidationReport { checks }
}

/// `V = θ·I + (1 − θ)·W` with `θ ∈ (0, 1/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryMatrix {
    v: Mat,
    theta: f64,
}

pub const DEFAULT_THETA: f64 = 0.5;

impl AuxiliaryMatrix {
    pub fn new(mixing: &MixingMatrix, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "theta {theta} outside (0, 1/2]"
            )));
        }
        let n = mixing.agents();
        let v = linalg::identity(n) * theta + mixing.matrix() * (1.0 - theta);
        Ok(Self { v, theta })
    }

    pub fn matrix(&self) -> &Mat {
        &self.v
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}
