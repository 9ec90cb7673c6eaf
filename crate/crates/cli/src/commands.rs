use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use driftbench::baseline::BaselinePredictor;
use driftbench::data::{generate_drift_stream, write_dataset, FeatureKind};
use driftbench::harness::{
    run_suite, ConstantPredictor, DatasetSource, Phase, PhaseConfig, Predictor, SubprocessPredictor, SuiteDataset,
};
use driftbench::ranking::{build_leaderboard, merge_bundles, Leaderboard, OverlapPolicy, SubmissionEntry};
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, Builtin, PredictorConfig, RunConfig};

pub const SUBMISSION_FILE: &str = "submission.json";

/// What `evaluate` writes next to the trace and score files: the entry a
/// leaderboard is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub phase: Phase,
    pub datasets: Vec<String>,
    pub entry: SubmissionEntry,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write every generated dataset of the config; returns the summary table.
pub fn generate(config: &RunConfig) -> Result<String> {
    fs::create_dir_all(&config.data_dir).with_context(|| format!("creating {}", config.data_dir.display()))?;
    let mut table = format!(
        "{:<12} {:>10} {:>5} {:>5} {:>5} {:>5} {:>9} {:>10}\n",
        "dataset", "budget_s", "cat", "num", "mvc", "time", "features", "instances"
    );
    for d in &config.datasets {
        let Some(spec) = config.generator_spec(d) else { continue };
        let ds = generate_drift_stream(&spec).with_context(|| format!("generating `{}`", d.id))?;
        let (data, schema) = config.dataset_files(d);
        write_dataset(&ds, &data, &schema).with_context(|| format!("writing `{}`", d.id))?;
        let s = ds.schema();
        writeln!(
            table,
            "{:<12} {:>10} {:>5} {:>5} {:>5} {:>5} {:>9} {:>10}",
            d.id,
            d.budget_secs,
            s.count(FeatureKind::Categorical),
            s.count(FeatureKind::Numerical),
            s.count(FeatureKind::MultiValuedCategorical),
            s.count(FeatureKind::Time),
            s.width(),
            ds.len()
        )?;
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub phase: Phase,
    /// Registered predictor ids; empty means all of them.
    pub predictors: Vec<String>,
    pub jobs: usize,
    pub workdir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct EvaluateReport {
    pub submissions: Vec<Submission>,
    pub summary: String,
}

impl EvaluateReport {
    pub fn any_disqualified(&self) -> bool {
        self.submissions
            .iter()
            .any(|s| s.entry.disqualified.iter().any(|&d| d))
    }
}

pub fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Feedback => "feedback",
        Phase::Final => "final",
    }
}

fn make_predictor(
    config: &RunConfig,
    p: &PredictorConfig,
    dataset: &SuiteDataset,
    workdir: &Path,
) -> driftbench::Result<Box<dyn Predictor>> {
    match (p.builtin, &p.executable) {
        (Some(Builtin::Baseline), _) => {
            let mut cfg = p.baseline.clone();
            cfg.seed = derive_seed(config.seed, &format!("{}/{}", p.id, dataset.id));
            let b = BaselinePredictor::new(&p.id, cfg)?;
            Ok(Box::new(if p.frozen { b.frozen() } else { b }))
        }
        (Some(Builtin::Constant), _) => Ok(Box::new(ConstantPredictor::new(&p.id, p.constant))),
        (None, Some(exe)) => {
            let dir = workdir.join(&dataset.id);
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(|e| driftbench::Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
            }
            Ok(Box::new(
                SubprocessPredictor::new(&p.id, exe, &dir)?.with_args(p.args.clone()),
            ))
        }
        (None, None) => unreachable!("validated config names a builtin or an executable"),
    }
}

/// Run the phase's datasets for each selected predictor and write traces,
/// scores and the submission file under `<output_dir>/<phase>/<predictor>/`.
pub fn evaluate(config: &RunConfig, opts: &EvaluateOptions) -> Result<EvaluateReport> {
    let selected: Vec<&PredictorConfig> = if opts.predictors.is_empty() {
        config.predictors.iter().collect()
    } else {
        opts.predictors
            .iter()
            .map(|id| config.predictor(id).ok_or_else(|| anyhow!("unknown predictor `{id}`")))
            .collect::<Result<_>>()?
    };
    ensure!(!selected.is_empty(), "no predictors registered in the config");
    ensure!(opts.jobs >= 1, "--jobs must be at least 1");

    let datasets: Vec<SuiteDataset> = config
        .phase_datasets(opts.phase)
        .into_iter()
        .map(|d| {
            let (data, schema) = config.dataset_files(d);
            SuiteDataset {
                id: d.id.clone(),
                source: DatasetSource::Files { data, schema },
                budget_secs: d.budget_secs,
            }
        })
        .collect();
    let phase = PhaseConfig {
        phase: opts.phase,
        datasets,
        blocks: config.blocks,
        daily_cap: config.daily_cap(opts.phase),
    };
    let phase_dir = config.output_dir.join(phase_name(opts.phase));

    let mut report = EvaluateReport {
        submissions: Vec::new(),
        summary: String::new(),
    };
    for p in selected {
        let out = phase_dir.join(&p.id);
        if out.exists() {
            fs::remove_dir_all(&out).with_context(|| format!("clearing {}", out.display()))?;
        }
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let workdir = opts.workdir.join(phase_name(opts.phase)).join(&p.id);
        let result = run_suite(&phase, |d| make_predictor(config, p, d, &workdir), opts.jobs)?;

        for (trace, score) in result.traces.iter().zip(&result.scores) {
            write_json(&out.join(format!("trace_{}.json", trace.dataset)), trace)?;
            write_json(&out.join(format!("score_{}.json", score.dataset)), score)?;
            writeln!(
                report.summary,
                "{:<16} {:<12} auc {:.4}  {:>8.2}s  {:?}{}",
                p.id,
                score.dataset,
                score.mean_auc,
                score.total_elapsed_secs,
                trace.outcome,
                trace.message.as_deref().map(|m| format!(" ({m})")).unwrap_or_default()
            )?;
        }
        let submission = Submission {
            phase: opts.phase,
            datasets: result.scores.iter().map(|s| s.dataset.clone()).collect(),
            entry: SubmissionEntry {
                team: p.id.clone(),
                bundle: p.bundle.clone(),
                aucs: result.scores.iter().map(|s| s.mean_auc).collect(),
                disqualified: result.scores.iter().map(|s| s.disqualified).collect(),
                duration_secs: result.total_duration_secs,
            },
        };
        write_json(&out.join(SUBMISSION_FILE), &submission)?;
        report.submissions.push(submission);
    }
    Ok(report)
}

/// Collect submission files: `<dir>/submission.json`, or one level below.
fn find_submissions(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let direct = dir.join(SUBMISSION_FILE);
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    let mut found: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path().join(SUBMISSION_FILE)))
        .filter(|p| p.is_file())
        .collect();
    found.sort();
    ensure!(!found.is_empty(), "no {SUBMISSION_FILE} in {}", dir.display());
    Ok(found)
}

pub fn read_submission(path: &Path) -> Result<Submission> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct LeaderboardReport {
    /// Board name (bundle id or `merged`) and board, in output order.
    pub boards: Vec<(String, Leaderboard)>,
}

/// Build one board per bundle and, with `merge`, the merged board; write
/// them as `leaderboard_<name>.csv` into `out_dir`.
pub fn leaderboard(inputs: &[PathBuf], merge: bool, out_dir: &Path) -> Result<LeaderboardReport> {
    ensure!(!inputs.is_empty(), "give at least one score directory");
    let mut submissions = Vec::new();
    for dir in inputs {
        for path in find_submissions(dir)? {
            submissions.push(read_submission(&path)?);
        }
    }
    let datasets = submissions[0].datasets.clone();
    for s in &submissions {
        if s.datasets != datasets {
            bail!(
                "team `{}` was scored on {:?}, expected {:?}",
                s.entry.team,
                s.datasets,
                datasets
            );
        }
    }

    let mut bundles: BTreeMap<String, Vec<SubmissionEntry>> = BTreeMap::new();
    for s in submissions {
        bundles.entry(s.entry.bundle.clone()).or_default().push(s.entry);
    }
    let mut boards = Vec::new();
    for (bundle, entries) in &bundles {
        boards.push((bundle.clone(), build_leaderboard(entries, &datasets)?));
    }
    if merge {
        let all: Vec<Vec<SubmissionEntry>> = bundles.into_values().collect();
        boards.push(("merged".into(), merge_bundles(&all, &datasets, OverlapPolicy::Exclude)?));
    }

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (name, board) in &boards {
        let path = out_dir.join(format!("leaderboard_{name}.csv"));
        fs::write(&path, board.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(LeaderboardReport { boards })
}
