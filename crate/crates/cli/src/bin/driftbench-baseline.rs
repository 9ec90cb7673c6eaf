//! Reference external predictor speaking the subprocess protocol.
//!
//! Each invocation learns the revealed train file, scores the test file and
//! stores the whole learner state in `<workdir>/baseline_state.json` so the
//! next step continues where this one stopped.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::Parser;
use driftbench::baseline::{BaselineConfig, BaselinePredictor, DriftPolicy};
use driftbench::data::{load_dataset, load_unlabeled};

const STATE_FILE: &str = "baseline_state.json";

#[derive(Parser)]
#[command(name = "driftbench-baseline", version, about = "Boosted-tree baseline over the harness file protocol")]
struct Args {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    pred_out: PathBuf,
    #[arg(long)]
    remaining_budget: f64,
    #[arg(long)]
    step: usize,
    #[arg(long)]
    workdir: PathBuf,
    /// TOML file with baseline settings; read on the first step only.
    #[arg(long)]
    config: Option<PathBuf>,
    /// grow-full-history, adaptive-lr or sliding-window:K
    #[arg(long)]
    policy: Option<DriftPolicy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frozen: bool,
}

fn fresh(args: &Args) -> Result<BaselinePredictor> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<BaselineConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => BaselineConfig::default(),
    };
    if let Some(policy) = args.policy {
        config.policy = policy;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let p = BaselinePredictor::new("baseline", config)?;
    Ok(if args.frozen { p.frozen() } else { p })
}

fn main() -> Result<()> {
    let args = Args::parse();
    ensure!(args.step >= 1, "--step counts from 1");
    ensure!(args.remaining_budget >= 0.0, "--remaining-budget must be non-negative");
    fs::create_dir_all(&args.workdir)?;
    let state_path = args.workdir.join(STATE_FILE);
    let mut predictor = if state_path.exists() {
        let text = fs::read_to_string(&state_path)?;
        serde_json::from_str(&text).context("corrupt baseline state")?
    } else {
        fresh(&args)?
    };

    let train = load_dataset(&args.train, &args.schema)?;
    predictor.observe(args.step - 1, train.rows(), train.labels(), train.schema())?;
    let (_, test_rows) = load_unlabeled(&args.test, &args.schema)?;
    let scores = predictor.score(&test_rows)?;

    let mut out = String::with_capacity(scores.len() * 20);
    for s in scores {
        writeln!(out, "{s}")?;
    }
    fs::write(&args.pred_out, out).with_context(|| format!("writing {}", args.pred_out.display()))?;
    fs::write(&state_path, serde_json::to_vec(&predictor)?)?;
    Ok(())
}
