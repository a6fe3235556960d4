//! Experiment runner: builds problem and network from a config, runs single
//! step sizes or grids, and writes CSV traces.

pub mod config;

use std::cmp::Ordering;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use config::{
    parse_config, parse_config_in, parse_grid, ConfigError, ConfigErrorKind, ConfigErrors,
    ExperimentConfig, ProblemConfig, StepSizes,
};

use crate::algorithms::{run, RunTrace, Termination};
use crate::error::{Error, Result};
use crate::manifold::ManifoldSpec;
use crate::problems::{
    generate_quadratic, generate_synthetic_lrmc, generate_synthetic_pca, load_matrix, PcaData,
    ProblemInstance,
};
use crate::topology::{build_graph, Graph, MixingMatrix};

/// Overrides `run.output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "REXTRA_OUTPUT_DIR";

pub const SUMMARY_FILE: &str = "summary.csv";

pub const SUMMARY_HEADER: &str =
    "fingerprint,algorithm,best_alpha,final_grad_norm,final_consensus_err,epochs,comm_entries_cum";

/// Reads and parses a config file, resolving relative paths against its
/// directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_config_in(&text, path.parent())?)
}

/// First 16 hex digits of the SHA-256 of the canonical config text.
pub fn fingerprint(config: &ExperimentConfig) -> String {
    let digest = Sha256::digest(config.canonical().as_bytes());
    hex::encode(&digest[..8])
}

pub fn build_problem(config: &ExperimentConfig) -> Result<ProblemInstance> {
    let seed = config.seed;
    Ok(match &config.problem {
        ProblemConfig::PcaSynthetic(p) => generate_synthetic_pca(p, seed)?.into(),
        ProblemConfig::LrmcSynthetic(p) => generate_synthetic_lrmc(p, seed)?.into(),
        ProblemConfig::PcaFile {
            path,
            format,
            agents,
            rank,
            normalize,
        } => {
            let data = load_matrix(path, *format)? / *normalize;
            PcaData::from_matrix(&data, *agents, *rank, seed)?.into()
        }
        ProblemConfig::Quadratic {
            agents,
            rows,
            cols,
            manifold,
        } => {
            let spec = ManifoldSpec::new(*manifold, *rows, *cols)?;
            generate_quadratic(spec, *agents, seed)?.into()
        }
    })
}

pub fn build_network(config: &ExperimentConfig) -> Result<(Graph, MixingMatrix)> {
    let graph = build_graph(config.graph, config.problem.agents(), config.seed)?;
    let mixing = MixingMatrix::metropolis(&graph)?;
    Ok((graph, mixing))
}

/// One grid point's result.
#[derive(Debug, Clone)]
pub struct GridEntry {
    pub alpha: f64,
    pub fingerprint: String,
    pub trace: RunTrace,
}

impl GridEntry {
    fn final_grad(&self) -> f64 {
        self.trace.last().grad_norm.unwrap_or(f64::INFINITY)
    }

    fn failed(&self) -> bool {
        matches!(self.trace.termination, Termination::Failed(_))
    }
}

/// Orders grid entries best first: converged runs (tied on the final
/// gradient, which only says "below tolerance") by fewer epochs, then
/// running and failed runs by final gradient norm; smaller `α` breaks ties.
pub fn compare_entries(a: &GridEntry, b: &GridEntry) -> Ordering {
    let class = |e: &GridEntry| {
        if e.trace.converged() {
            0
        } else if e.failed() {
            2
        } else {
            1
        }
    };
    class(a)
        .cmp(&class(b))
        .then_with(|| {
            if a.trace.converged() {
                a.trace.last().epoch.total_cmp(&b.trace.last().epoch)
            } else {
                a.final_grad().total_cmp(&b.final_grad())
            }
        })
        .then_with(|| a.alpha.total_cmp(&b.alpha))
}

#[derive(Debug, Clone)]
pub struct GridResult {
    /// In grid order (ascending `α`).
    pub entries: Vec<GridEntry>,
    /// Index of the best entry.
    pub best: usize,
}

impl GridResult {
    pub fn best(&self) -> &GridEntry {
        &self.entries[self.best]
    }
}

/// Runs every step size of the config on one shared problem and network.
pub fn grid_search(
    config: &ExperimentConfig,
    problem: &ProblemInstance,
    mixing: &MixingMatrix,
) -> Result<GridResult> {
    let alphas = config.steps.values();
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("empty step-size grid".into()));
    }
    let entries = alphas
        .par_iter()
        .map(|&alpha| {
            let trace = run(problem, mixing, &config.run_config(alpha), None)?;
            Ok(GridEntry {
                alpha,
                fingerprint: fingerprint(&config.with_alpha(alpha)),
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = (0..entries.len())
        .min_by(|&i, &j| compare_entries(&entries[i], &entries[j]))
        .expect("grid is nonempty");
    Ok(GridResult { entries, best })
}

/// Where results go: the override variable if set, else the config's
/// directory.
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| config.output_dir.clone())
}

static SUMMARY_LOCK: Mutex<()> = Mutex::new(());

fn summary_line(config_fp: &str, entry: &GridEntry) -> String {
    let last = entry.trace.last();
    let metric = |v: Option<f64>| v.map_or_else(|| "singular".into(), |v| format!("{v:e}"));
    format!(
        "{},{},{:e},{},{},{},{}",
        config_fp,
        entry.trace.algorithm,
        entry.alpha,
        metric(last.grad_norm),
        metric(last.consensus_err),
        last.epoch,
        last.comm_entries_cum
    )
}

fn append_summary(dir: &Path, line: &str) -> Result<()> {
    let _guard = SUMMARY_LOCK.lock().unwrap_or_else(|p| p.into_inner());
    let path = dir.join(SUMMARY_FILE);
    let fresh = fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(SUMMARY_HEADER);
        text.push('\n');
    }
    text.push_str(line);
    text.push('\n');
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(&path, e))
}

/// What [`run_experiment`] produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub fingerprint: String,
    pub grid: GridResult,
    pub trace_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
}

/// Runs the config (one `α` or a whole grid), writes `<fingerprint>.csv` per
/// run and appends the best run to `summary.csv`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let dir = output_dir(config);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let problem = build_problem(config)?;
    let (_, mixing) = build_network(config)?;
    let grid = grid_search(config, &problem, &mixing)?;

    let mut trace_files = Vec::with_capacity(grid.entries.len());
    for entry in &grid.entries {
        let path = dir.join(format!("{}.csv", entry.fingerprint));
        fs::write(&path, entry.trace.to_csv()).map_err(|e| Error::io(&path, e))?;
        trace_files.push(path);
    }
    let fp = fingerprint(config);
    append_summary(&dir, &summary_line(&fp, grid.best()))?;
    Ok(ExperimentOutcome {
        fingerprint: fp,
        grid,
        trace_files,
        summary_file: dir.join(SUMMARY_FILE),
    })
}
