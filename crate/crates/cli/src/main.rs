use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use driftbench::harness::Phase;
use driftbench_cli::{commands, EvaluateOptions, RunConfig};

/// Exit codes: 0 success, 1 usage or config error, 2 a dataset was disqualified.
#[derive(Parser)]
#[command(name = "driftbench", version, about = "Lifelong evaluation of binary classifiers on drifting streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Feedback,
    Final,
}

impl From<PhaseArg> for Phase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Feedback => Phase::Feedback,
            PhaseArg::Final => Phase::Final,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic datasets declared in the config.
    Generate {
        config: PathBuf,
        /// Overrides the config's top-level seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run registered predictors over a phase and write trace/score files.
    Evaluate {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "feedback")]
        phase: PhaseArg,
        /// Predictor id to run; repeat for several. Default: all registered.
        #[arg(long = "predictor")]
        predictors: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Datasets evaluated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Scratch space for external predictors. Default: <output_dir>/work.
        #[arg(long, env = "DRIFTBENCH_WORKDIR")]
        workdir: Option<PathBuf>,
        /// Overrides the config's output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Build leaderboards from evaluate output directories.
    Leaderboard {
        /// Directories holding submission.json, or their parents.
        #[arg(required = true)]
        scores: Vec<PathBuf>,
        /// Also write the merged board across bundles.
        #[arg(long)]
        merge: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn load(config: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut c = RunConfig::load(config)?;
    if let Some(seed) = seed {
        c.seed = seed;
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { config, seed } => {
            let config = load(&config, seed)?;
            print!("{}", commands::generate(&config)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            config,
            phase,
            predictors,
            seed,
            jobs,
            workdir,
            out_dir,
        } => {
            let mut config = load(&config, seed)?;
            if let Some(out) = out_dir {
                config.output_dir = out;
            }
            let workdir = workdir.unwrap_or_else(|| config.output_dir.join("work"));
            let opts = EvaluateOptions {
                phase: phase.into(),
                predictors,
                jobs,
                workdir,
            };
            let report = commands::evaluate(&config, &opts)?;
            print!("{}", report.summary);
            Ok(if report.any_disqualified() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Leaderboard { scores, merge, out_dir } => {
            let report = commands::leaderboard(&scores, merge, &out_dir)?;
            for (name, board) in &report.boards {
                println!("# {name}");
                print!("{}", board.to_csv());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
