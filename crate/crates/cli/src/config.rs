//! Run configuration, read from a single TOML document.
//!
//! ```toml
//! seed = 7                 # every generator and learner seed derives from this
//! blocks = 10              # N, blocks per dataset
//! data_dir = "data"        # where `generate` writes and `evaluate` reads
//! output_dir = "out"       # traces, scores and submission files
//!
//! [[dataset]]
//! id = "B"
//! budget_secs = 60
//! [dataset.generate]       # or: data = "b.csv", schema = "b.schema.csv"
//! rows = 20000
//! categorical = 17
//! numerical = 7
//! multi_valued = 1
//! profile = "gradual"      # none | gradual | abrupt
//! magnitude = 1.0
//!
//! [phase.feedback]
//! datasets = ["B"]
//!
//! [[predictor]]
//! id = "baseline"
//! bundle = "env-a"
//! builtin = "baseline"     # baseline | constant; or executable = "path"
//! [predictor.baseline]
//! policy = { kind = "sliding-window", blocks = 2 }
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use driftbench::baseline::BaselineConfig;
use driftbench::data::{DriftGenSpec, DriftProfile, KindCounts};
use driftbench::harness::Phase;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub phase: Phases,
    #[serde(default, rename = "predictor")]
    pub predictors: Vec<PredictorConfig>,
}

fn default_blocks() -> usize {
    10
}

fn default_data_dir() -> PathBuf {
    "data".into()
}

fn default_output_dir() -> PathBuf {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub budget_secs: f64,
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub generate: Option<GenerateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub rows: usize,
    #[serde(default)]
    pub categorical: usize,
    #[serde(default)]
    pub numerical: usize,
    #[serde(default)]
    pub multi_valued: usize,
    #[serde(default)]
    pub time: usize,
    #[serde(default = "default_profile")]
    pub profile: DriftProfile,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default = "default_cardinality")]
    pub cardinality: usize,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_profile() -> DriftProfile {
    DriftProfile::None
}

fn default_cardinality() -> usize {
    100
}

fn default_exponent() -> f64 {
    1.1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phases {
    pub feedback: Option<PhaseSection>,
    #[serde(rename = "final")]
    pub final_phase: Option<PhaseSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub datasets: Vec<String>,
    #[serde(default = "default_daily_cap")]
    pub daily_cap: u32,
}

fn default_daily_cap() -> u32 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Baseline,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorConfig {
    pub id: String,
    #[serde(default = "default_bundle")]
    pub bundle: String,
    pub builtin: Option<Builtin>,
    pub executable: Option<PathBuf>,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub baseline: BaselineConfig,
    /// Baseline only: never extend after the first block.
    #[serde(default)]
    pub frozen: bool,
    /// Constant only: the score given to every row.
    #[serde(default = "default_constant")]
    pub constant: f64,
}

fn default_bundle() -> String {
    "default".into()
}

fn default_constant() -> f64 {
    0.5
}

/// Stable 64-bit mix of the top-level seed with a name.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Load and resolve relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config = Self::from_toml(&text).with_context(|| format!("in config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.data_dir);
        join(&mut self.output_dir);
        for d in &mut self.datasets {
            d.data.as_mut().map(join);
            d.schema.as_mut().map(join);
        }
        for p in &mut self.predictors {
            if let Some(exe) = p.executable.as_mut() {
                // Bare names are looked up on PATH.
                if exe.components().count() > 1 {
                    join(exe);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.blocks >= 2, "blocks must be at least 2, got {}", self.blocks);
        let mut ids = HashSet::new();
        for d in &self.datasets {
            ensure!(ids.insert(d.id.as_str()), "dataset `{}` declared twice", d.id);
            ensure!(
                d.budget_secs > 0.0 && d.budget_secs.is_finite(),
                "dataset `{}`: budget_secs must be positive",
                d.id
            );
            match (&d.generate, &d.data, &d.schema) {
                (Some(_), None, None) | (None, Some(_), Some(_)) => {}
                _ => bail!("dataset `{}`: give either a [generate] section or both data and schema", d.id),
            }
        }
        for section in [&self.phase.feedback, &self.phase.final_phase].into_iter().flatten() {
            for id in &section.datasets {
                ensure!(ids.contains(id.as_str()), "phase lists unknown dataset `{id}`");
            }
        }
        let mut names = HashSet::new();
        for p in &self.predictors {
            ensure!(names.insert(p.id.as_str()), "predictor `{}` declared twice", p.id);
            ensure!(
                p.builtin.is_some() != p.executable.is_some(),
                "predictor `{}`: give exactly one of builtin or executable",
                p.id
            );
            if p.builtin == Some(Builtin::Baseline) {
                p.baseline.validate().with_context(|| format!("predictor `{}`", p.id))?;
            }
        }
        Ok(())
    }

    pub fn dataset(&self, id: &str) -> Option<&DatasetConfig> {
        self.datasets.iter().find(|d| d.id == id)
    }

    pub fn predictor(&self, id: &str) -> Option<&PredictorConfig> {
        self.predictors.iter().find(|p| p.id == id)
    }

    /// Datasets of a phase in configured order; all datasets when the phase
    /// has no section.
    pub fn phase_datasets(&self, phase: Phase) -> Vec<&DatasetConfig> {
        let section = match phase {
            Phase::Feedback => &self.phase.feedback,
            Phase::Final => &self.phase.final_phase,
        };
        match section {
            Some(s) => s.datasets.iter().filter_map(|id| self.dataset(id)).collect(),
            None => self.datasets.iter().collect(),
        }
    }

    pub fn daily_cap(&self, phase: Phase) -> u32 {
        let section = match phase {
            Phase::Feedback => &self.phase.feedback,
            Phase::Final => &self.phase.final_phase,
        };
        section.as_ref().map_or_else(default_daily_cap, |s| s.daily_cap)
    }

    /// Data and schema file of a dataset.
    pub fn dataset_files(&self, d: &DatasetConfig) -> (PathBuf, PathBuf) {
        match (&d.data, &d.schema) {
            (Some(data), Some(schema)) => (data.clone(), schema.clone()),
            _ => (
                self.data_dir.join(format!("{}.csv", d.id)),
                self.data_dir.join(format!("{}.schema.csv", d.id)),
            ),
        }
    }

    pub fn generator_spec(&self, d: &DatasetConfig) -> Option<DriftGenSpec> {
        let g = d.generate.as_ref()?;
        Some(DriftGenSpec {
            rows: g.rows,
            counts: KindCounts {
                categorical: g.categorical,
                numerical: g.numerical,
                multi_valued: g.multi_valued,
                time: g.time,
            },
            blocks: self.blocks,
            profile: g.profile,
            magnitude: g.magnitude,
            cardinality: g.cardinality,
            exponent: g.exponent,
            seed: derive_seed(self.seed, &d.id),
        })
    }
}
