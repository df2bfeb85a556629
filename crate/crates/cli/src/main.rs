use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedmtl_core::experiment::{evaluate_checkpoint, generate_csv, run_experiment, ExperimentConfig};
use fedmtl_core::metrics::{emit_report, format_table};
use fedmtl_core::Error;

/// Federated multi-task transfer learning simulator for accelerometer data.
#[derive(Parser)]
#[command(name = "fedmtl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for per-client training; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic clients as CSV files.
    GenData(Common),
    /// Run the configured regimes and write reports and checkpoints.
    Run(Common),
    /// Evaluate a checkpoint without training.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV files or directories to evaluate instead of the config's data.
        #[arg(long, num_args = 1..)]
        data: Option<Vec<PathBuf>>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::Usage("--workers must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::Runtime(e.to_string()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenData(c) => {
            let cfg = load(&c.config)?;
            for path in generate_csv(&cfg, &c.out)? {
                println!("{}", path.display());
            }
        }
        Command::Run(c) => {
            let cfg = load(&c.config)?;
            let output = pool(c.workers)?.install(|| run_experiment(&cfg))?;
            output.write(&c.out)?;
            print!("{}", format_table(&output.report));
        }
        Command::Eval {
            common: c,
            checkpoint,
            data,
        } => {
            let cfg = load(&c.config)?;
            let report = pool(c.workers)?.install(|| evaluate_checkpoint(&cfg, &checkpoint, data.as_deref()))?;
            emit_report(&report, &c.out)?;
            print!("{}", format_table(&report));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
