//! `dfsvm` command-line entry point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfsvm::Error;

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "dfsvm", version, about = "Factor stochastic volatility-in-mean VARs: fit, forecast, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate data, latent paths and parameters from a model.
    Simulate(Common),
    /// Run the posterior sampler and write draws plus a summary table.
    Fit(Common),
    /// Predictive point forecasts from the end of the sample.
    Forecast(Common),
    /// Expanding-window forecast evaluation.
    Backtest(Common),
    /// Gains, Diebold-Mariano tests and model confidence sets from backtest output.
    Evaluate(Common),
    /// Print and write the posterior summary of saved draws.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        3
    } else if e.is_io() {
        4
    } else {
        2
    }
}

fn run(cli: Cli) -> dfsvm::Result<()> {
    let (Command::Simulate(c)
    | Command::Fit(c)
    | Command::Forecast(c)
    | Command::Backtest(c)
    | Command::Evaluate(c)
    | Command::Report(c)) = &cli.command;
    let flags = Overrides { seed: c.seed, threads: c.threads, out_dir: c.out_dir.clone() };
    let cfg = RunConfig::load(c.config.as_deref(), &flags)?;
    if let Some(n) = cfg.threads {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Fit(_) => commands::fit(&cfg),
        Command::Forecast(_) => commands::forecast(&cfg),
        Command::Backtest(_) => commands::backtest(&cfg),
        Command::Evaluate(_) => commands::evaluate(&cfg),
        Command::Report(_) => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
