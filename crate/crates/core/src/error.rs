use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    /// The point is outside the region where the nearest-point projection is
    /// unique. During a solver run this almost always means the step size is
    /// too large.
    #[error(
        "projection onto the manifold is not unique (smallest singular value {sigma_min:.3e}); \
         reduce the step size"
    )]
    SingularProjection { sigma_min: f64 },

    #[error("input of norm {norm:.6} is outside the admissible tube of radius {radius:.6}")]
    TubeViolation { norm: f64, radius: f64 },

    #[error("graph with {n} nodes is disconnected")]
    Disconnected { n: usize },

    #[error("no connected Erdos-Renyi graph after {attempts} draws")]
    RetryExhausted { attempts: usize },

    #[error("matrix has numerical rank {rank}, need {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("{total} items cannot be split evenly across {agents} agents")]
    IndivisibleSplit { total: usize, agents: usize },

    #[error("initial block of agent {agent} is {residual:.3e} away from the manifold")]
    InfeasibleStart { agent: usize, residual: f64 },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Config(#[from] crate::harness::config::ConfigErrors),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual })
        }
    }
}
