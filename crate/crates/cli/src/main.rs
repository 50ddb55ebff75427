//! `sgexplain`: generate datasets, train classifiers and explain their
//! predictions with Shapley-scored subgraph search.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod common;
mod eval;
mod explain;
mod gen;
mod predict;
mod settings;
mod train;

use settings::{ConfigFile, Merge, UsageError};

#[derive(Parser, Debug)]
#[command(name = "sgexplain", version, about = "Subgraph explanations for graph neural networks")]
struct Cli {
    /// TOML file with defaults for every command; flags take precedence.
    #[arg(long, global = true, env = "SUBGRAPHX_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads for `explain`.
    #[arg(long, global = true, env = "SUBGRAPHX_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Gen(gen::GenArgs),
    Train(train::TrainArgs),
    Predict(predict::PredictArgs),
    Explain(explain::ExplainArgs),
    Eval(eval::EvalArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let workers = cli
        .workers
        .or(file.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(settings::usage("--workers must be at least 1"));
    }
    match cli.command {
        Command::Gen(a) => gen::run(a.merge(file.gen)),
        Command::Train(a) => train::run(a.merge(file.train)),
        Command::Predict(a) => predict::run(a.merge(file.predict)),
        Command::Explain(a) => explain::run(a.merge(file.explain), workers),
        Command::Eval(a) => eval::run(a.merge(file.eval)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
