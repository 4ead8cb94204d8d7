use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ste_cli::run::assign_input;
use ste_cli::{run, CliError, ExperimentConfig, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "ste", version, about = "Soft tournament equilibria for pairwise comparison data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ste-out")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write a fixed timestamp so identical runs produce identical files.
    #[arg(long, global = true)]
    reproducible: bool,
    /// Comparison CSV or matrix CSV, detected from the header.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Exact Top Cycle, Uncovered Set and Condorcet winner.
    Solve,
    /// Soft membership scores of a tournament.
    Soft,
    /// Fit Bradley-Terry strengths with STE regularization, then score.
    Fit,
    /// Generate a synthetic instance.
    Synth,
    /// Core-recovery experiment over a synthetic grid.
    Experiment,
    /// Bootstrap stability of soft cores.
    Bootstrap,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Mode {
        match c {
            Command::Solve => Mode::Solve,
            Command::Soft => Mode::Soft,
            Command::Fit => Mode::Fit,
            Command::Synth => Mode::Synth,
            Command::Experiment => Mode::Experiment,
            Command::Bootstrap => Mode::Bootstrap,
        }
    }
}

fn main_inner(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(input) = cli.input {
        assign_input(&mut cfg, input)?;
    }
    let opts = RunOptions {
        out: cli.out,
        reproducible: cli.reproducible,
    };
    run(cfg, cli.command.into(), &opts)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
