//! `pcdisco`: generate causal-discovery datasets, run them through the
//! exact engine or a chat model, and score the results.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::FileConfig;

#[derive(Parser)]
#[command(name = "pcdisco", version, about = "Causal discovery benchmark runner")]
struct Cli {
    /// TOML file with `seed`, `[chat]` and `[traces]` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate graphs over n variables and write a labeled dataset.
    Generate {
        #[arg(long, short)]
        n: usize,
        /// Comma-separated relation kinds; all six by default.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
        #[arg(long, short)]
        out: PathBuf,
        /// Overwrite an existing output file.
        #[arg(long)]
        force: bool,
    },
    /// Re-derive every label with the exact engine.
    Solve {
        #[arg(long, short)]
        dataset: PathBuf,
        /// Also write engine run records here.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Run a dataset in any mode: baseline, pipeline or oracle.
    Run {
        #[arg(long, short)]
        mode: String,
        #[command(flatten)]
        run: commands::RunArgs,
    },
    /// Single-prompt run.
    RunBaseline {
        #[command(flatten)]
        run: commands::RunArgs,
    },
    /// Four-stage run.
    RunPipeline {
        #[command(flatten)]
        run: commands::RunArgs,
    },
    /// Join a run with its dataset and report metrics.
    Score {
        #[arg(long, short)]
        run: PathBuf,
        #[arg(long, short)]
        dataset: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Write per-sample rows (tokens, correctness) as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// Premise statistics for samples with right and wrong skeletons.
        #[arg(long)]
        failure_profile: bool,
    },
    /// Micro-step, self-check and revisit counts for stored model traces.
    Traces {
        #[arg(long, short)]
        run: PathBuf,
        #[arg(long, short)]
        dataset: PathBuf,
        /// Only analyze this stage's traces.
        #[arg(long)]
        stage: Option<String>,
        /// Comma-separated self-check markers, replacing the configured ones.
        #[arg(long, value_delimiter = ',')]
        markers: Vec<String>,
        #[arg(long)]
        case_sensitive: bool,
        #[arg(long)]
        json: bool,
    },
    /// Bootstrap mean, spread and 95% interval of F1.
    Bootstrap {
        #[arg(long, short)]
        run: PathBuf,
        #[arg(long, short)]
        dataset: PathBuf,
        /// Outer repetitions.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Resamples per repetition.
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match FileConfig::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Generate {
            n,
            kinds,
            out,
            force,
        } => commands::generate(n, &kinds, &out, force),
        Command::Solve {
            dataset,
            out,
            force,
        } => commands::solve(&dataset, out.as_deref(), force),
        Command::Run { mode, run } => commands::run(&mode, &run, &file),
        Command::RunBaseline { run } => commands::run("baseline", &run, &file),
        Command::RunPipeline { run } => commands::run("pipeline", &run, &file),
        Command::Score {
            run,
            dataset,
            json,
            csv,
            failure_profile,
        } => commands::score(&run, &dataset, json, csv.as_deref(), failure_profile),
        Command::Traces {
            run,
            dataset,
            stage,
            markers,
            case_sensitive,
            json,
        } => {
            let mut cfg = file.traces.clone();
            if !markers.is_empty() {
                cfg.markers = markers;
            }
            if case_sensitive {
                cfg.case_insensitive = false;
            }
            commands::traces(&run, &dataset, stage.as_deref(), &cfg, json)
        }
        Command::Bootstrap {
            run,
            dataset,
            reps,
            resamples,
            seed,
            json,
        } => {
            let seed = seed.or(file.seed).unwrap_or(0);
            commands::bootstrap(&run, &dataset, reps, resamples, seed, json)
        }
    };
    match result {
        Ok(commands::Outcome::Done) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial(msg)) => {
            eprintln!("warning: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
