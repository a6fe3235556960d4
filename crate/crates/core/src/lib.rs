//! Decentralized smooth optimization over compact matrix manifolds: the
//! REXTRA recursion, EXTRA, projected/retracted gradient and gradient
//! tracking baselines, PCA and matrix-completion benchmarks, and the metrics
//! and inequality probes used to check them.

pub mod algorithms;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod probes;
pub mod problems;
pub mod stack;
pub mod topology;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use manifold::{ManifoldKind, ManifoldSpec};
pub use stack::AgentStack;
