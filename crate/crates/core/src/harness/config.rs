//! Line-oriented experiment configuration:
//!
//! ```text
//! [problem]
//! kind = pca_synthetic
//! [graph]
//! kind = er
//! p = 0.6
//! [algorithm]
//! name = rextra
//! grid = {1,2,4,6,8} x {1e-5,1e-4,1e-3,1e-2}
//! [run]
//! max_epochs = 2000
//! ```
//!
//! `#` starts a comment. Relative file paths resolve against the config's
//! directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::algorithms::{Algorithm, RunConfig, ScheduleKind};
use crate::manifold::ManifoldKind;
use crate::problems::{LrmcSynthetic, MatrixFormat, PcaSynthetic, DEFAULT_RIDGE};
use crate::topology::{GraphKind, DEFAULT_THETA};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigErrorKind {
    UnknownKey {
        key: String,
    },
    /// A recognized key with an unrecognized value.
    UnknownValue {
        key: String,
        value: String,
    },
    TypeError {
        key: String,
        expected: String,
    },
    MissingKey {
        key: String,
    },
    Conflict {
        key: String,
        other: String,
    },
    Duplicate {
        key: String,
        first_line: usize,
    },
    MissingFile {
        key: String,
        path: PathBuf,
    },
    Syntax {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based; 0 when the problem is the absence of a line.
    pub line: usize,
    pub kind: ConfigErrorKind,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: ", self.line)?;
        }
        match &self.kind {
            ConfigErrorKind::UnknownKey { key } => write!(f, "unknown key `{key}`"),
            ConfigErrorKind::UnknownValue { key, value } => {
                write!(f, "unknown value `{value}` for `{key}`")
            }
            ConfigErrorKind::TypeError { key, expected } => {
                write!(f, "`{key}` must be {expected}")
            }
            ConfigErrorKind::MissingKey { key } => write!(f, "missing key `{key}`"),
            ConfigErrorKind::Conflict { key, other } => {
                write!(f, "`{key}` conflicts with `{other}`; give exactly one")
            }
            ConfigErrorKind::Duplicate { key, first_line } => {
                write!(f, "`{key}` already set on line {first_line}")
            }
            ConfigErrorKind::MissingFile { key, path } => {
                write!(f, "`{key}` refers to missing file {}", path.display())
            }
            ConfigErrorKind::Syntax { message } => f.write_str(message),
        }
    }
}

/// Every problem found while parsing, in line order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config ({} error", self.0.len())?;
        if self.0.len() != 1 {
            f.write_str("s")?;
        }
        f.write_str(")")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    PcaSynthetic(PcaSynthetic),
    LrmcSynthetic(LrmcSynthetic),
    PcaFile {
        path: PathBuf,
        format: MatrixFormat,
        agents: usize,
        rank: usize,
        /// Entries are divided by this before use (255 for 8-bit images).
        normalize: f64,
    },
    Quadratic {
        agents: usize,
        rows: usize,
        cols: usize,
        manifold: ManifoldKind,
    },
}

impl ProblemConfig {
    pub fn agents(&self) -> usize {
        match self {
            ProblemConfig::PcaSynthetic(p) => p.agents,
            ProblemConfig::LrmcSynthetic(p) => p.agents,
            ProblemConfig::PcaFile { agents, .. } | ProblemConfig::Quadratic { agents, .. } => {
                *agents
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepSizes {
    Alpha(f64),
    Grid(Vec<f64>),
}

impl StepSizes {
    pub fn values(&self) -> Vec<f64> {
        match self {
            StepSizes::Alpha(a) => vec![*a],
            StepSizes::Grid(g) => g.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub graph: GraphKind,
    pub algorithm: Algorithm,
    pub steps: StepSizes,
    pub schedule: Option<ScheduleKind>,
    pub theta: f64,
    pub t_rounds: usize,
    pub batch: Option<usize>,
    pub max_epochs: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// The solver settings for one step size.
    pub fn run_config(&self, alpha: f64) -> RunConfig {
        RunConfig {
            algorithm: self.algorithm,
            alpha,
            schedule: self.schedule,
            theta: self.theta,
            t_rounds: self.t_rounds,
            max_epochs: self.max_epochs,
            grad_tol: self.grad_tol,
            seed: self.seed,
            batch: self.batch,
        }
    }

    /// Fully resolved `section.key = value` lines in a fixed order, with
    /// defaults filled in and the output directory left out.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.problem {
            ProblemConfig::PcaSynthetic(p) => {
                line("problem.kind", "pca_synthetic".into());
                line("problem.n", p.agents.to_string());
                line("problem.m_per", p.rows_per_agent.to_string());
                line("problem.d", p.dim.to_string());
                line("problem.r", p.rank.to_string());
                line("problem.xi", format!("{:?}", p.xi));
                line("problem.scale", format!("{:?}", p.resolved_scale()));
            }
            ProblemConfig::LrmcSynthetic(p) => {
                line("problem.kind", "lrmc_synthetic".into());
                line("problem.n", p.agents.to_string());
                line("problem.d", p.rows.to_string());
                line("problem.T", p.cols.to_string());
                line("problem.r", p.rank.to_string());
                line("problem.ridge", format!("{:?}", p.ridge));
                line("problem.density", format!("{:?}", p.resolved_density()));
            }
            ProblemConfig::PcaFile {
                path,
                format,
                agents,
                rank,
                normalize,
            } => {
                line("problem.kind", "pca_file".into());
                line("problem.path", path.display().to_string());
                line("problem.format", format_name(*format).into());
                line("problem.n", agents.to_string());
                line("problem.r", rank.to_string());
                line("problem.normalize", format!("{normalize:?}"));
            }
            ProblemConfig::Quadratic {
                agents,
                rows,
                cols,
                manifold,
            } => {
                line("problem.kind", "quadratic".into());
                line("problem.n", agents.to_string());
                line("problem.d", rows.to_string());
                line("problem.r", cols.to_string());
                line("problem.manifold", manifold_name(*manifold).into());
            }
        }
        match self.graph {
            GraphKind::ErdosRenyi { p } => {
                line("graph.kind", "er".into());
                line("graph.p", format!("{p:?}"));
            }
            GraphKind::Ring => line("graph.kind", "ring".into()),
            GraphKind::Complete => line("graph.kind", "complete".into()),
        }
        line("algorithm.name", self.algorithm.to_string());
        match &self.steps {
            StepSizes::Alpha(a) => line("algorithm.alpha", format!("{a:?}")),
            StepSizes::Grid(g) => line(
                "algorithm.grid",
                g.iter()
                    .map(|a| format!("{a:?}"))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        }
        line(
            "algorithm.schedule",
            self.schedule
                .unwrap_or(self.algorithm.default_schedule())
                .to_string(),
        );
        line("algorithm.theta", format!("{:?}", self.theta));
        line("algorithm.t_rounds", self.t_rounds.to_string());
        line(
            "algorithm.batch",
            self.batch.map_or_else(|| "full".into(), |b| b.to_string()),
        );
        line("run.max_epochs", self.max_epochs.to_string());
        line("run.grad_tol", format!("{:?}", self.grad_tol));
        line("run.seed", self.seed.to_string());
        out
    }

    /// The same experiment pinned to one step size.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            steps: StepSizes::Alpha(alpha),
            ..self.clone()
        }
    }
}

fn format_name(f: MatrixFormat) -> &'static str {
    match f {
        MatrixFormat::Csv => "csv",
        MatrixFormat::RawF64 => "raw_f64",
    }
}

fn manifold_name(k: ManifoldKind) -> &'static str {
    match k {
        ManifoldKind::Stiefel => "stiefel",
        ManifoldKind::Euclidean => "euclidean",
    }
}

const SECTIONS: [&str; 4] = ["problem", "graph", "algorithm", "run"];

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Raw entries keyed by `section.key`, plus collected errors.
struct Raw {
    entries: BTreeMap<String, Entry>,
    errors: Vec<ConfigError>,
}

impl Raw {
    fn parse(text: &str) -> Self {
        let mut raw = Raw {
            entries: BTreeMap::new(),
            errors: Vec::new(),
        };
        let mut section: Option<String> = None;
        for (idx, full) in text.lines().enumerate() {
            let line = idx + 1;
            let content = full.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    raw.error(
                        line,
                        ConfigErrorKind::Syntax {
                            message: format!("malformed section header `{content}`"),
                        },
                    );
                    continue;
                };
                let name = name.trim();
                if SECTIONS.contains(&name) {
                    section = Some(name.to_string());
                } else {
                    raw.error(
                        line,
                        ConfigErrorKind::UnknownKey {
                            key: format!("[{name}]"),
                        },
                    );
                    section = None;
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                raw.error(
                    line,
                    ConfigErrorKind::Syntax {
                        message: format!("expected `key = value`, found `{content}`"),
                    },
                );
                continue;
            };
            let Some(sec) = &section else {
                raw.error(
                    line,
                    ConfigErrorKind::Syntax {
                        message: format!("`{}` appears outside a known section", key.trim()),
                    },
                );
                continue;
            };
            let full_key = format!("{sec}.{}", key.trim());
            if let Some(prev) = raw.entries.get(&full_key) {
                let first_line = prev.line;
                raw.error(
                    line,
                    ConfigErrorKind::Duplicate {
                        key: full_key,
                        first_line,
                    },
                );
                continue;
            }
            raw.entries.insert(
                full_key,
                Entry {
                    value: value.trim().to_string(),
                    line,
                    used: false,
                },
            );
        }
        raw
    }

    fn error(&mut self, line: usize, kind: ConfigErrorKind) {
        self.errors.push(ConfigError { line, kind });
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    /// Typed lookup; records a TypeError and returns `None` on bad input.
    fn typed<T>(
        &mut self,
        key: &str,
        expected: &str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Option<T> {
        let (value, line) = self.take(key)?;
        match parse(&value) {
            Some(v) => Some(v),
            None => {
                self.error(
                    line,
                    ConfigErrorKind::TypeError {
                        key: key.into(),
                        expected: expected.into(),
                    },
                );
                None
            }
        }
    }

    fn required<T>(
        &mut self,
        key: &str,
        expected: &str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Option<T> {
        if !self.has(key) {
            self.error(0, ConfigErrorKind::MissingKey { key: key.into() });
            return None;
        }
        self.typed(key, expected, parse)
    }

    fn count(&mut self, key: &str, default: usize) -> usize {
        self.typed(key, "a positive integer", |s| {
            s.parse().ok().filter(|&n: &usize| n > 0)
        })
        .unwrap_or(default)
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        self.typed(key, "a positive number", parse_positive)
            .unwrap_or(default)
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Option<T> {
        let (value, line) = self.take(key)?;
        match options.iter().find(|(name, _)| *name == value) {
            Some((_, v)) => Some(*v),
            None => {
                self.error(
                    line,
                    ConfigErrorKind::UnknownValue {
                        key: key.into(),
                        value,
                    },
                );
                None
            }
        }
    }

    /// Flags every entry that no extractor consumed.
    fn finish(mut self) -> Vec<ConfigError> {
        let leftovers: Vec<(String, usize)> = self
            .entries
            .iter()
            .filter(|(_, e)| !e.used)
            .map(|(k, e)| (k.clone(), e.line))
            .collect();
        for (key, line) in leftovers {
            self.error(line, ConfigErrorKind::UnknownKey { key });
        }
        self.errors.sort_by_key(|e| e.line);
        self.errors
    }
}

fn parse_positive(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| *v > 0.0 && v.is_finite())
}

/// Rounds away the last-bit noise of products like `6 × 1e-5`.
fn tidy(v: f64) -> f64 {
    format!("{v:.12e}").parse().unwrap_or(v)
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    let inner = s.trim();
    let inner = inner
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .unwrap_or(inner);
    let values: Option<Vec<f64>> = inner.split(',').map(|t| parse_positive(t.trim())).collect();
    values.filter(|v| !v.is_empty())
}

/// A comma list, or a product of brace sets `{a,b} x {c,d}`; the result is
/// sorted ascending without duplicates.
pub fn parse_grid(s: &str) -> Option<Vec<f64>> {
    let mut values = vec![1.0];
    for factor in s.split(['x', '×']) {
        let set = parse_list(factor)?;
        values = values
            .iter()
            .flat_map(|a| set.iter().map(move |b| tidy(a * b)))
            .collect();
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    Some(values)
}

fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

/// Parses config text; relative paths resolve against `base_dir`.
pub fn parse_config_in(
    text: &str,
    base_dir: Option<&Path>,
) -> Result<ExperimentConfig, ConfigErrors> {
    let mut raw = Raw::parse(text);

    let kind = raw.required("problem.kind", "a problem kind", |s| Some(s.to_string()));
    let problem = match kind.as_deref() {
        Some("pca_synthetic") => {
            let d = PcaSynthetic::default();
            Some(ProblemConfig::PcaSynthetic(PcaSynthetic {
                agents: raw.count("problem.n", d.agents),
                rows_per_agent: raw.count("problem.m_per", d.rows_per_agent),
                dim: raw.count("problem.d", d.dim),
                rank: raw.count("problem.r", d.rank),
                xi: raw
                    .typed("problem.xi", "a number in (0, 1)", |s| {
                        s.parse::<f64>().ok().filter(|v| *v > 0.0 && *v < 1.0)
                    })
                    .unwrap_or(d.xi),
                scale: raw.typed("problem.scale", "a positive number", parse_positive),
            }))
        }
        Some("lrmc_synthetic") => {
            let d = LrmcSynthetic::default();
            Some(ProblemConfig::LrmcSynthetic(LrmcSynthetic {
                agents: raw.count("problem.n", d.agents),
                rows: raw.count("problem.d", d.rows),
                cols: raw.count("problem.T", d.cols),
                rank: raw.count("problem.r", d.rank),
                ridge: raw.positive("problem.ridge", DEFAULT_RIDGE),
                density: raw.typed("problem.density", "a number in (0, 1]", |s| {
                    s.parse::<f64>().ok().filter(|v| *v > 0.0 && *v <= 1.0)
                }),
            }))
        }
        Some("pca_file") => {
            let path = raw.required("problem.path", "a file path", |s| {
                Some(resolve(base_dir, s))
            });
            if let Some(p) = &path {
                if !p.is_file() {
                    let line = raw.line_of("problem.path");
                    raw.error(
                        line,
                        ConfigErrorKind::MissingFile {
                            key: "problem.path".into(),
                            path: p.clone(),
                        },
                    );
                }
            }
            let format = raw
                .choice(
                    "problem.format",
                    &[
                        ("csv", MatrixFormat::Csv),
                        ("raw_f64", MatrixFormat::RawF64),
                    ],
                )
                .unwrap_or(MatrixFormat::Csv);
            let agents = raw.count("problem.n", 8);
            let rank = raw.count("problem.r", 5);
            let normalize = raw.positive("problem.normalize", 1.0);
            path.map(|path| ProblemConfig::PcaFile {
                path,
                format,
                agents,
                rank,
                normalize,
            })
        }
        Some("quadratic") => Some(ProblemConfig::Quadratic {
            agents: raw.count("problem.n", 8),
            rows: raw.count("problem.d", 10),
            cols: raw.count("problem.r", 5),
            manifold: raw
                .choice(
                    "problem.manifold",
                    &[
                        ("euclidean", ManifoldKind::Euclidean),
                        ("stiefel", ManifoldKind::Stiefel),
                    ],
                )
                .unwrap_or(ManifoldKind::Euclidean),
        }),
        Some(other) => {
            let line = raw.line_of("problem.kind");
            raw.error(
                line,
                ConfigErrorKind::UnknownValue {
                    key: "problem.kind".into(),
                    value: other.into(),
                },
            );
            None
        }
        None => None,
    };

    let graph_kind = raw.required("graph.kind", "a graph kind", |s| Some(s.to_string()));
    let graph = match graph_kind.as_deref() {
        Some("er") => raw
            .required("graph.p", "a probability in (0, 1]", |s| {
                s.parse::<f64>().ok().filter(|v| *v > 0.0 && *v <= 1.0)
            })
            .map(|p| GraphKind::ErdosRenyi { p }),
        Some("ring") => Some(GraphKind::Ring),
        Some("complete") => Some(GraphKind::Complete),
        Some(other) => {
            let line = raw.line_of("graph.kind");
            raw.error(
                line,
                ConfigErrorKind::UnknownValue {
                    key: "graph.kind".into(),
                    value: other.into(),
                },
            );
            None
        }
        None => None,
    };

    let algorithm = if raw.has("algorithm.name") {
        let (name, line) = raw.take("algorithm.name").expect("checked");
        match Algorithm::from_str(&name) {
            Ok(a) => Some(a),
            Err(_) => {
                raw.error(
                    line,
                    ConfigErrorKind::UnknownValue {
                        key: "algorithm.name".into(),
                        value: name,
                    },
                );
                None
            }
        }
    } else {
        raw.error(
            0,
            ConfigErrorKind::MissingKey {
                key: "algorithm.name".into(),
            },
        );
        None
    };

    let steps = match (raw.has("algorithm.alpha"), raw.has("algorithm.grid")) {
        (true, true) => {
            raw.take("algorithm.alpha");
            let line = raw.line_of("algorithm.grid");
            raw.take("algorithm.grid");
            raw.error(
                line,
                ConfigErrorKind::Conflict {
                    key: "algorithm.grid".into(),
                    other: "algorithm.alpha".into(),
                },
            );
            None
        }
        (true, false) => raw
            .typed("algorithm.alpha", "a positive number", parse_positive)
            .map(StepSizes::Alpha),
        (false, true) => raw
            .typed(
                "algorithm.grid",
                "a list of positive numbers or a product like {1,2} x {1e-3,1e-2}",
                parse_grid,
            )
            .map(StepSizes::Grid),
        (false, false) => {
            raw.error(
                0,
                ConfigErrorKind::MissingKey {
                    key: "algorithm.alpha or algorithm.grid".into(),
                },
            );
            None
        }
    };

    let schedule = raw.choice(
        "algorithm.schedule",
        &[
            ("constant", ScheduleKind::Constant),
            ("diminishing", ScheduleKind::Diminishing),
        ],
    );
    let theta = raw
        .typed("algorithm.theta", "a number in (0, 0.5]", |s| {
            s.parse::<f64>().ok().filter(|v| *v > 0.0 && *v <= 0.5)
        })
        .unwrap_or(DEFAULT_THETA);
    let t_rounds = raw.count("algorithm.t_rounds", 1);
    let batch = raw.typed("algorithm.batch", "a positive integer or `full`", |s| {
        if s == "full" {
            Some(None)
        } else {
            s.parse::<usize>().ok().filter(|&b| b > 0).map(Some)
        }
    });

    let max_epochs = raw
        .typed("run.max_epochs", "a nonnegative integer", |s| {
            s.parse().ok()
        })
        .unwrap_or(2000);
    let grad_tol = raw.positive("run.grad_tol", 1e-8);
    let seed = raw
        .typed("run.seed", "a nonnegative integer", |s| s.parse().ok())
        .unwrap_or(0);
    let output_dir = raw
        .take("run.output_dir")
        .map(|(v, _)| resolve(base_dir, &v))
        .unwrap_or_else(|| PathBuf::from("output"));

    let errors = raw.finish();
    match (problem, graph, algorithm, steps) {
        (Some(problem), Some(graph), Some(algorithm), Some(steps)) if errors.is_empty() => {
            Ok(ExperimentConfig {
                problem,
                graph,
                algorithm,
                steps,
                schedule,
                theta,
                t_rounds,
                batch: batch.flatten(),
                max_epochs,
                grad_tol,
                seed,
                output_dir,
            })
        }
        _ => Err(ConfigErrors(errors)),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    parse_config_in(text, None)
}
