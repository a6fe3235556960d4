use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rextra::diagnostics::recursion_norm;
use rextra::harness::{self, ExperimentConfig, ExperimentOutcome, StepSizes, OUTPUT_DIR_ENV};
use rextra::probes::{self, Suite};
use rextra::topology::AuxiliaryMatrix;
use rextra::Error;

#[derive(Parser)]
#[command(
    name = "rextra",
    version,
    about = "Decentralized optimization on the Stiefel manifold"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config (a single step size or every entry of its grid).
    Run {
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Run a grid search; the config must give `grid`.
    Grid {
        config: PathBuf,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Parse a config, build its network and print the mixing checks.
    Validate { config: PathBuf },
    /// Run a randomized probe suite and print a pass/fail table.
    Probe {
        suite: Suite,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &PathBuf, output_dir: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut config = harness::load_config(path)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    Ok(config)
}

fn report(outcome: &ExperimentOutcome) {
    println!("config {}", outcome.fingerprint);
    for (i, entry) in outcome.grid.entries.iter().enumerate() {
        let last = entry.trace.last();
        let grad = last
            .grad_norm
            .map_or_else(|| "singular".into(), |g| format!("{g:.3e}"));
        println!(
            "{} alpha={:<10e} grad_norm={:<10} epochs={:<8} {} -> {}",
            if i == outcome.grid.best { "*" } else { " " },
            entry.alpha,
            grad,
            last.epoch,
            entry.trace.termination,
            entry.fingerprint,
        );
    }
    println!("summary appended to {}", outcome.summary_file.display());
}

fn experiment(path: &PathBuf, output_dir: Option<PathBuf>, need_grid: bool) -> Result<(), Error> {
    let config = load(path, output_dir)?;
    if need_grid && !matches!(config.steps, StepSizes::Grid(_)) {
        return Err(Error::InvalidArgument(format!(
            "{} gives `alpha`; `grid` needs `grid = ...`",
            path.display()
        )));
    }
    report(&harness::run_experiment(&config)?);
    Ok(())
}

fn validate(path: &PathBuf) -> Result<bool, Error> {
    let config = harness::load_config(path)?;
    let (graph, mixing) = harness::build_network(&config)?;
    println!("config {}", harness::fingerprint(&config));
    println!(
        "graph {} with {} nodes and {} edges ({} disconnected draws rejected)",
        config.graph,
        graph.nodes(),
        graph.edge_count(),
        graph.resamples
    );
    let checks = mixing.validate();
    for c in &checks.checks {
        println!(
            "{:<4} {:<28} {:.6e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value
        );
    }
    let aux = AuxiliaryMatrix::new(&mixing, config.theta)?;
    println!("sigma2 {:.6e}", mixing.sigma2());
    println!(
        "recursion norm {:.6e}",
        recursion_norm(mixing.matrix(), aux.matrix(), 0.0)?
    );
    Ok(checks.all_passed())
}

fn probe(suite: Suite, samples: usize, seed: u64) -> Result<bool, Error> {
    let checks = probes::run_suite(suite, samples, seed)?;
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output_dir } => {
            experiment(&config, output_dir, false).map(|()| true)
        }
        Command::Grid { config, output_dir } => {
            experiment(&config, output_dir, true).map(|()| true)
        }
        Command::Validate { config } => validate(&config),
        Command::Probe {
            suite,
            samples,
            seed,
        } => probe(suite, samples, seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
