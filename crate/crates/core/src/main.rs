use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zoprox::bench::{compare_traces, run_experiment, ExperimentConfig};
use zoprox::Error;

#[derive(Parser)]
#[command(name = "zoprox", version, about = "Zeroth-order proximal optimization benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config, one CSV trace per seed.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the algorithm id from the config.
        #[arg(long)]
        algo: Option<String>,
        /// Override the query budget.
        #[arg(long)]
        budget: Option<u64>,
        /// Override the seed list (comma separated).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two trace directories over a budget grid.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Budget grid (comma separated).
        #[arg(long, value_delimiter = ',')]
        budgets: Vec<u64>,
    },
}

// Exit codes: 0 success, 2 config error, 3 solver abort.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::Parse { .. } | Error::Json(_) | Error::TraceMismatch(_) => 2,
        Error::Diverged { .. } | Error::Stage { .. } | Error::SubproblemStalled { .. } => 3,
        Error::UnattainableContraction { .. } => 2,
        Error::Io(_) | Error::Csv(_) => 2,
        Error::NoWhitebox | Error::LambdaTooLarge { .. } => 2,
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            algo,
            budget,
            seeds,
            out,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(algo) = algo {
                cfg.algorithm = algo.parse()?;
            }
            if let Some(budget) = budget {
                cfg.fqc_budget = budget;
            }
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            cfg.validate()?;
            let paths = run_experiment(&cfg)?;
            for p in paths {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Compare { a, b, budgets } => {
            if budgets.is_empty() {
                return Err(Error::InvalidConfig("need at least one budget".into()));
            }
            let summary = compare_traces(&a, &b, &budgets)?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
