//! C interface to the `rextra` solvers.
//!
//! Objects are opaque handles created by `rextra_*_new`-style constructors and
//! released by the matching `rextra_*_free`. Every fallible function returns a
//! [`RextraStatus`]; on failure, [`rextra_last_error_message`] describes the
//! most recent error on the calling thread. Matrices cross the boundary as
//! row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use rextra::algorithms::{
    build_solver, initial_point, run, Algorithm, RunConfig, RunTrace, ScheduleKind, Solver,
    Termination,
};
use rextra::diagnostics::{CommTally, MetricsRow};
use rextra::problems::{
    generate_quadratic, generate_synthetic_lrmc, generate_synthetic_pca, LocalObjectives,
    LrmcSynthetic, PcaData, PcaSynthetic, ProblemInstance,
};
use rextra::topology::{build_graph, GraphKind, MixingMatrix, DEFAULT_THETA};
use rextra::{Error, ManifoldSpec, Mat};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RextraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    SingularProjection = 4,
    Disconnected = 5,
    BufferTooSmall = 6,
    Io = 7,
    Config = 8,
    Numerical = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RextraAlgorithm {
    Rextra = 0,
    Extra = 1,
    Drdgd = 2,
    Dprgd = 3,
    Drgta = 4,
    Dprgt = 5,
}

impl From<RextraAlgorithm> for Algorithm {
    fn from(a: RextraAlgorithm) -> Self {
        match a {
            RextraAlgorithm::Rextra => Algorithm::Rextra,
            RextraAlgorithm::Extra => Algorithm::Extra,
            RextraAlgorithm::Drdgd => Algorithm::Drdgd,
            RextraAlgorithm::Dprgd => Algorithm::Dprgd,
            RextraAlgorithm::Drgta => Algorithm::Drgta,
            RextraAlgorithm::Dprgt => Algorithm::Dprgt,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RextraGraph {
    ErdosRenyi = 0,
    Ring = 1,
    Complete = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RextraTermination {
    Converged = 0,
    MaxEpochs = 1,
    Failed = 2,
}

/// Solver settings. Start from [`rextra_run_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RextraRunOptions {
    pub algorithm: RextraAlgorithm,
    pub alpha: f64,
    /// Use `alpha / sqrt(k + 1)`; only the decentralized gradient baselines
    /// accept it.
    pub diminishing: bool,
    pub theta: f64,
    pub t_rounds: u32,
    pub max_epochs: u32,
    pub grad_tol: f64,
    pub seed: u64,
    /// Per-agent minibatch size, 0 for full gradients.
    pub batch: u32,
}

/// One metrics row; unavailable values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RextraMetrics {
    pub k: u64,
    pub epoch: f64,
    pub comm_entries_cum: u64,
    pub consensus_err: f64,
    pub grad_norm: f64,
    pub fval: f64,
    pub ds: f64,
}

impl From<&MetricsRow> for RextraMetrics {
    fn from(row: &MetricsRow) -> Self {
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        Self {
            k: row.k as u64,
            epoch: row.epoch,
            comm_entries_cum: row.comm_entries_cum,
            consensus_err: nan(row.consensus_err),
            grad_norm: nan(row.grad_norm),
            fval: nan(row.fval),
            ds: nan(row.ds),
        }
    }
}

pub struct RextraProblem {
    inner: Arc<ProblemInstance>,
}

pub struct RextraNetwork {
    mixing: MixingMatrix,
}

pub struct RextraSolver {
    problem: Arc<ProblemInstance>,
    solver: Box<dyn Solver>,
    metric_spec: ManifoldSpec,
    tally: CommTally,
}

pub struct RextraTrace {
    trace: RunTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RextraStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::Shape(_) => RextraStatus::DimensionMismatch,
        Error::SingularProjection { .. } => RextraStatus::SingularProjection,
        Error::Disconnected { .. } | Error::RetryExhausted { .. } => RextraStatus::Disconnected,
        Error::Io { .. } => RextraStatus::Io,
        Error::Config(_) | Error::Parse { .. } => RextraStatus::Config,
        Error::InvalidArgument(_)
        | Error::IndivisibleSplit { .. }
        | Error::InfeasibleStart { .. } => RextraStatus::InvalidArgument,
        _ => RextraStatus::Numerical,
    }
}

enum Failure {
    Status(RextraStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(RextraStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure::Status(RextraStatus::InvalidArgument, message.into())
}

/// Runs `body`, converting errors and panics into a status code and the
/// thread's last error message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RextraStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RextraStatus::Ok,
        Ok(Err(Failure::Status(status, message))) => {
            set_last_error(message);
            status
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RextraStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees `p` is NULL or a live handle.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller guarantees `p` is NULL or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

fn count(value: usize, what: &str) -> Result<usize, Failure> {
    if value == 0 {
        Err(invalid(format!("{what} must be positive")))
    } else {
        Ok(value)
    }
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    // SAFETY: checked non-NULL; the caller guarantees it is writable.
    let slot = unsafe { deref_mut(out, "out")? };
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_matrix(m: &Mat, buf: *mut f64, len: usize) -> Result<(), Failure> {
    let needed = m.nrows() * m.ncols();
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < needed {
        return Err(Failure::Status(
            RextraStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {needed}"),
        ));
    }
    // SAFETY: `buf` is non-NULL and the caller guarantees `len` writable values.
    let out = unsafe { std::slice::from_raw_parts_mut(buf, needed) };
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rextra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rextra_run_options_default() -> RextraRunOptions {
    let d = RunConfig::default();
    RextraRunOptions {
        algorithm: RextraAlgorithm::Rextra,
        alpha: d.alpha,
        diminishing: false,
        theta: DEFAULT_THETA,
        t_rounds: d.t_rounds as u32,
        max_epochs: d.max_epochs as u32,
        grad_tol: d.grad_tol,
        seed: d.seed,
        batch: 0,
    }
}

fn run_config(options: &RextraRunOptions) -> RunConfig {
    let algorithm = Algorithm::from(options.algorithm);
    RunConfig {
        algorithm,
        alpha: options.alpha,
        schedule: Some(if options.diminishing {
            ScheduleKind::Diminishing
        } else {
            ScheduleKind::Constant
        }),
        theta: options.theta,
        t_rounds: options.t_rounds as usize,
        max_epochs: options.max_epochs as usize,
        grad_tol: options.grad_tol,
        seed: options.seed,
        batch: (options.batch > 0).then_some(options.batch as usize),
    }
}

/// Synthetic PCA with `rows_per_agent` rows per agent in dimension `dim`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_problem_pca_synthetic(
    agents: usize,
    rows_per_agent: usize,
    dim: usize,
    rank: usize,
    xi: f64,
    seed: u64,
    out: *mut *mut RextraProblem,
) -> RextraStatus {
    guard(|| {
        let params = PcaSynthetic {
            agents: count(agents, "agents")?,
            rows_per_agent: count(rows_per_agent, "rows_per_agent")?,
            dim: count(dim, "dim")?,
            rank: count(rank, "rank")?,
            xi,
            scale: None,
        };
        if !(xi > 0.0 && xi < 1.0) {
            return Err(invalid("xi must lie in (0, 1)"));
        }
        let data = generate_synthetic_pca(&params, seed)?;
        // SAFETY: forwarded from the caller.
        unsafe {
            write_out(
                out,
                RextraProblem {
                    inner: Arc::new(data.into()),
                },
            )
        }
    })
}

/// Synthetic low-rank completion of a `rows × cols` matrix split by columns.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_problem_lrmc_synthetic(
    agents: usize,
    rows: usize,
    cols: usize,
    rank: usize,
    ridge: f64,
    seed: u64,
    out: *mut *mut RextraProblem,
) -> RextraStatus {
    guard(|| {
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(invalid("ridge must be positive"));
        }
        let params = LrmcSynthetic {
            agents: count(agents, "agents")?,
            rows: count(rows, "rows")?,
            cols: count(cols, "cols")?,
            rank: count(rank, "rank")?,
            ridge,
            density: None,
        };
        let data = generate_synthetic_lrmc(&params, seed)?;
        // SAFETY: forwarded from the caller.
        unsafe {
            write_out(
                out,
                RextraProblem {
                    inner: Arc::new(data.into()),
                },
            )
        }
    })
}

/// `f_i(x) = ½‖x − b_i‖²` with Gaussian targets, on the Stiefel manifold or
/// on the whole space.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_problem_quadratic(
    agents: usize,
    rows: usize,
    cols: usize,
    euclidean: bool,
    seed: u64,
    out: *mut *mut RextraProblem,
) -> RextraStatus {
    guard(|| {
        let spec = if euclidean {
            ManifoldSpec::euclidean(rows, cols)?
        } else {
            ManifoldSpec::stiefel(rows, cols)?
        };
        let data = generate_quadratic(spec, count(agents, "agents")?, seed)?;
        // SAFETY: forwarded from the caller.
        unsafe {
            write_out(
                out,
                RextraProblem {
                    inner: Arc::new(data.into()),
                },
            )
        }
    })
}

/// PCA on a caller-supplied row-major `rows × cols` data matrix whose rows
/// are dealt randomly to `agents` agents.
///
/// # Safety
/// `data` must point to `rows * cols` readable values; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_problem_pca_from_rows(
    data: *const f64,
    rows: usize,
    cols: usize,
    agents: usize,
    rank: usize,
    seed: u64,
    out: *mut *mut RextraProblem,
) -> RextraStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| invalid("rows * cols overflows"))?;
        // SAFETY: the caller guarantees `rows * cols` readable values.
        let values = unsafe { std::slice::from_raw_parts(data, len) };
        let matrix = Mat::from_row_slice(rows, cols, values);
        let pca = PcaData::from_matrix(&matrix, agents, rank, seed)?;
        // SAFETY: forwarded from the caller.
        unsafe {
            write_out(
                out,
                RextraProblem {
                    inner: Arc::new(pca.into()),
                },
            )
        }
    })
}

/// # Safety
/// `problem` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_problem_shape(
    problem: *const RextraProblem,
    agents: *mut usize,
    rows: *mut usize,
    cols: *mut usize,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let p = unsafe { deref(problem, "problem")? };
        let (d, r) = p.inner.manifold().shape();
        // SAFETY: forwarded from the caller.
        unsafe {
            *deref_mut(agents, "agents")? = p.inner.agents();
            *deref_mut(rows, "rows")? = d;
            *deref_mut(cols, "cols")? = r;
        }
        Ok(())
    })
}

/// # Safety
/// `problem` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rextra_problem_free(problem: *mut RextraProblem) {
    if !problem.is_null() {
        // SAFETY: the handle came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Metropolis weights on a connected graph; `p` is used only for
/// Erdős–Rényi graphs.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_network_new(
    graph: RextraGraph,
    agents: usize,
    p: f64,
    seed: u64,
    out: *mut *mut RextraNetwork,
) -> RextraStatus {
    guard(|| {
        let kind = match graph {
            RextraGraph::ErdosRenyi => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(invalid("p must lie in (0, 1]"));
                }
                GraphKind::ErdosRenyi { p }
            }
            RextraGraph::Ring => GraphKind::Ring,
            RextraGraph::Complete => GraphKind::Complete,
        };
        let mixing = MixingMatrix::metropolis(&build_graph(kind, agents, seed)?)?;
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, RextraNetwork { mixing }) }
    })
}

/// Second largest singular value of the mixing matrix.
///
/// # Safety
/// `network` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_network_sigma2(
    network: *const RextraNetwork,
    out: *mut f64,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        unsafe { *deref_mut(out, "out")? = deref(network, "network")?.mixing.sigma2() };
        Ok(())
    })
}

/// Copies the `n × n` mixing matrix, row-major.
///
/// # Safety
/// `network` must be a live handle; `buf` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn rextra_network_weights(
    network: *const RextraNetwork,
    buf: *mut f64,
    len: usize,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        unsafe { copy_matrix(deref(network, "network")?.mixing.matrix(), buf, len) }
    })
}

/// # Safety
/// `network` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rextra_network_free(network: *mut RextraNetwork) {
    if !network.is_null() {
        // SAFETY: the handle came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(network) });
    }
}

unsafe fn inputs<'a>(
    problem: *const RextraProblem,
    network: *const RextraNetwork,
    options: *const RextraRunOptions,
) -> Result<(&'a RextraProblem, &'a RextraNetwork, RunConfig), Failure> {
    // SAFETY: forwarded from the caller.
    let (p, n, o) = unsafe {
        (
            deref(problem, "problem")?,
            deref(network, "network")?,
            deref(options, "options")?,
        )
    };
    if p.inner.agents() != n.mixing.agents() {
        return Err(Failure::Status(
            RextraStatus::DimensionMismatch,
            format!(
                "problem has {} agents, network has {}",
                p.inner.agents(),
                n.mixing.agents()
            ),
        ));
    }
    Ok((p, n, run_config(o)))
}

/// A solver started at the seeded consensual point. It keeps its own
/// reference to the problem data; the network is only read here.
///
/// # Safety
/// `problem`, `network` and `options` must be live; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_solver_new(
    problem: *const RextraProblem,
    network: *const RextraNetwork,
    options: *const RextraRunOptions,
    out: *mut *mut RextraSolver,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let (p, n, config) = unsafe { inputs(problem, network, options)? };
        let spec = p.inner.manifold();
        let x0 = initial_point(&spec, p.inner.agents(), config.seed);
        let solver = build_solver(p.inner.as_ref(), &n.mixing, &config, x0)?;
        let metric_spec = if config.algorithm == Algorithm::Extra {
            spec.flattened()
        } else {
            spec
        };
        let handle = RextraSolver {
            problem: Arc::clone(&p.inner),
            solver,
            metric_spec,
            tally: CommTally::default(),
        };
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, handle) }
    })
}

/// Advances one iteration. `metrics` may be NULL; otherwise it receives the
/// metrics after the step.
///
/// # Safety
/// `solver` must be live; `metrics` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_solver_step(
    solver: *mut RextraSolver,
    metrics: *mut RextraMetrics,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let s = unsafe { deref_mut(solver, "solver")? };
        let report = s.solver.step(s.problem.as_ref())?;
        s.tally.add(&report);
        if !metrics.is_null() {
            let row = measure(s)?;
            // SAFETY: non-NULL and writable per the contract.
            unsafe { *metrics = RextraMetrics::from(&row) };
        }
        Ok(())
    })
}

fn measure(s: &RextraSolver) -> Result<MetricsRow, Failure> {
    Ok(MetricsRow::measure(
        &s.metric_spec,
        s.problem.as_ref(),
        s.solver.iterate(),
        s.solver.iteration(),
        &s.tally,
    )?)
}

/// # Safety
/// `solver` must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_solver_metrics(
    solver: *const RextraSolver,
    out: *mut RextraMetrics,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let row = measure(unsafe { deref(solver, "solver")? })?;
        // SAFETY: forwarded from the caller.
        unsafe { *deref_mut(out, "out")? = RextraMetrics::from(&row) };
        Ok(())
    })
}

/// Copies agent `agent`'s current `d × r` iterate, row-major.
///
/// # Safety
/// `solver` must be live; `buf` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn rextra_solver_copy_block(
    solver: *const RextraSolver,
    agent: usize,
    buf: *mut f64,
    len: usize,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let s = unsafe { deref(solver, "solver")? };
        let blocks = s.solver.iterate().blocks();
        let block = blocks.get(agent).ok_or_else(|| {
            invalid(format!(
                "agent {agent} out of range for {} agents",
                blocks.len()
            ))
        })?;
        // SAFETY: forwarded from the caller.
        unsafe { copy_matrix(block, buf, len) }
    })
}

/// # Safety
/// `solver` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rextra_solver_free(solver: *mut RextraSolver) {
    if !solver.is_null() {
        // SAFETY: the handle came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(solver) });
    }
}

/// Runs to convergence or the epoch budget. A run that breaks down midway
/// still succeeds and reports [`RextraTermination::Failed`].
///
/// # Safety
/// `problem`, `network` and `options` must be live; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_run(
    problem: *const RextraProblem,
    network: *const RextraNetwork,
    options: *const RextraRunOptions,
    out: *mut *mut RextraTrace,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let (p, n, config) = unsafe { inputs(problem, network, options)? };
        let trace = run(p.inner.as_ref(), &n.mixing, &config, None)?;
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, RextraTrace { trace }) }
    })
}

/// Number of metrics rows, including the initial one. 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or live.
#[no_mangle]
pub unsafe extern "C" fn rextra_trace_len(trace: *const RextraTrace) -> usize {
    // SAFETY: forwarded from the caller.
    unsafe { trace.as_ref() }.map_or(0, |t| t.trace.rows.len())
}

/// # Safety
/// `trace` must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_trace_row(
    trace: *const RextraTrace,
    index: usize,
    out: *mut RextraMetrics,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let t = unsafe { deref(trace, "trace")? };
        let row = t
            .trace
            .rows
            .get(index)
            .ok_or_else(|| invalid(format!("row {index} out of range")))?;
        // SAFETY: forwarded from the caller.
        unsafe { *deref_mut(out, "out")? = RextraMetrics::from(row) };
        Ok(())
    })
}

/// How the run ended. A failed run's reason is available through
/// [`rextra_last_error_message`] right after this call.
///
/// # Safety
/// `trace` must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rextra_trace_termination(
    trace: *const RextraTrace,
    out: *mut RextraTermination,
) -> RextraStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let t = unsafe { deref(trace, "trace")? };
        let termination = match &t.trace.termination {
            Termination::Converged => RextraTermination::Converged,
            Termination::MaxEpochs => RextraTermination::MaxEpochs,
            Termination::Failed(reason) => {
                set_last_error(reason.clone());
                RextraTermination::Failed
            }
        };
        // SAFETY: forwarded from the caller.
        unsafe { *deref_mut(out, "out")? = termination };
        Ok(())
    })
}

/// # Safety
/// `trace` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rextra_trace_free(trace: *mut RextraTrace) {
    if !trace.is_null() {
        // SAFETY: the handle came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(trace) });
    }
}
