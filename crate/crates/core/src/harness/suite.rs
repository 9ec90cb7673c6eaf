use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_lifelong, EvaluationTrace, Predictor};
use crate::data::{load_dataset, split_blocks, ChronoDataset};
use crate::error::{Error, Result};
use crate::metrics::DatasetScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Feedback,
    Final,
}

#[derive(Debug, Clone)]
pub enum DatasetSource {
    Files { data: PathBuf, schema: PathBuf },
    InMemory(Arc<ChronoDataset>),
}

#[derive(Debug, Clone)]
pub struct SuiteDataset {
    pub id: String,
    pub source: DatasetSource,
    pub budget_secs: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseConfig {
    pub phase: Phase,
    pub datasets: Vec<SuiteDataset>,
    /// Block count N used for every dataset.
    pub blocks: usize,
    /// Submissions allowed per day; recorded, not enforced.
    pub daily_cap: u32,
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            return Err(Error::Config(format!("need at least 2 blocks, got {}", self.blocks)));
        }
        for d in &self.datasets {
            if !(d.budget_secs > 0.0 && d.budget_secs.is_finite()) {
                return Err(Error::Config(format!("dataset `{}`: budget must be positive", d.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    /// One trace per dataset, in configured order.
    pub traces: Vec<EvaluationTrace>,
    pub scores: Vec<DatasetScore>,
    /// Sum of per-dataset elapsed seconds; the leaderboard tie-break.
    pub total_duration_secs: f64,
}

fn evaluate_one<F>(dataset: &SuiteDataset, blocks: usize, factory: &F) -> EvaluationTrace
where
    F: Fn(&SuiteDataset) -> Result<Box<dyn Predictor>>,
{
    let budget = Duration::from_secs_f64(dataset.budget_secs);
    let loaded = match &dataset.source {
        DatasetSource::Files { data, schema } => load_dataset(data, schema).map(Arc::new),
        DatasetSource::InMemory(ds) => Ok(ds.clone()),
    };
    let prepared = loaded.and_then(|ds| split_blocks(&ds, blocks).map(|plan| (ds, plan)));
    let (ds, plan) = match prepared {
        Ok(p) => p,
        Err(e) => return EvaluationTrace::failed(&dataset.id, "", blocks, dataset.budget_secs, e.to_string()),
    };
    let predictor = match factory(dataset) {
        Ok(p) => p,
        Err(e) => return EvaluationTrace::failed(&dataset.id, "", blocks, dataset.budget_secs, e.to_string()),
    };
    let id = predictor.id().to_string();
    run_lifelong(&dataset.id, &ds, &plan, predictor, budget)
        .unwrap_or_else(|e| EvaluationTrace::failed(&dataset.id, &id, blocks, dataset.budget_secs, e.to_string()))
}

/// Evaluate a fresh predictor from `factory` on every dataset of the phase.
///
/// Up to `jobs` datasets run at once. A failing dataset is recorded in its
/// own score and the rest of the suite still runs.
pub fn run_suite<F>(phase: &PhaseConfig, factory: F, jobs: usize) -> Result<SuiteResult>
where
    F: Fn(&SuiteDataset) -> Result<Box<dyn Predictor>> + Sync,
{
    phase.validate()?;
    let traces: Vec<EvaluationTrace> = if jobs <= 1 {
        phase
            .datasets
            .iter()
            .map(|d| evaluate_one(d, phase.blocks, &factory))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} jobs: {e}")))?;
        pool.install(|| {
            phase
                .datasets
                .par_iter()
                .map(|d| evaluate_one(d, phase.blocks, &factory))
                .collect()
        })
    };
    let scores: Vec<DatasetScore> = traces.iter().map(EvaluationTrace::score).collect();
    let total_duration_secs = scores.iter().map(|s| s.total_elapsed_secs).sum();
    Ok(SuiteResult {
        traces,
        scores,
        total_duration_secs,
    })
}

#[cfg(test)]
mod tests {
    use std::thread;

    use super::*;
    use crate::data::{Feature, FeatureKind, FeatureSchema};
    use crate::error::PredictorError;
    use crate::harness::{Block, Outcome};

    struct Echo {
        sleep: Duration,
    }

    impl Predictor for Echo {
        fn id(&self) -> &str {
            "echo"
        }
        fn learn(&mut self, _: &Block, _: &[u8], _: &FeatureSchema, _: Duration) -> Result<(), PredictorError> {
            thread::sleep(self.sleep);
            Ok(())
        }
        fn predict(&mut self, block: &Block, _: &FeatureSchema, _: Duration) -> Result<Vec<f64>, PredictorError> {
            Ok(block.rows.iter().map(|r| r[0].parse().unwrap()).collect())
        }
    }

    fn toy(id: &str, budget_secs: f64) -> SuiteDataset {
        let schema = FeatureSchema::new(
            vec![Feature {
                name: "x".into(),
                kind: FeatureKind::Numerical,
            }],
            "y",
        )
        .unwrap();
        let rows = (0..50).map(|i| vec![(i % 2).to_string()]).collect();
        let labels = (0..50).map(|i| (i % 2) as u8).collect();
        SuiteDataset {
            id: id.into(),
            source: DatasetSource::InMemory(Arc::new(ChronoDataset::new(schema, rows, labels, id).unwrap())),
            budget_secs,
        }
    }

    fn phase(datasets: Vec<SuiteDataset>) -> PhaseConfig {
        PhaseConfig {
            phase: Phase::Feedback,
            datasets,
            blocks: 5,
            daily_cap: 2,
        }
    }

    #[test]
    fn empty_suite_is_empty() {
        let r = run_suite(&phase(vec![]), |_| Ok(Box::new(Echo { sleep: Duration::ZERO }) as _), 1).unwrap();
        assert!(r.scores.is_empty());
        assert_eq!(r.total_duration_secs, 0.0);
    }

    #[test]
    fn one_timeout_does_not_stop_the_suite() {
        let mut sets: Vec<SuiteDataset> = (0..5).map(|i| toy(&format!("d{i}"), 30.0)).collect();
        sets[2].budget_secs = 0.05;
        let factory = |d: &SuiteDataset| -> Result<Box<dyn Predictor>> {
            let sleep = if d.id == "d2" {
                Duration::from_millis(200)
            } else {
                Duration::ZERO
            };
            Ok(Box::new(Echo { sleep }))
        };
        let r = run_suite(&phase(sets), factory, 2).unwrap();
        assert_eq!(r.scores.len(), 5);
        let ids: Vec<&str> = r.scores.iter().map(|s| s.dataset.as_str()).collect();
        assert_eq!(ids, ["d0", "d1", "d2", "d3", "d4"]);
        for (i, s) in r.scores.iter().enumerate() {
            if i == 2 {
                assert!(s.disqualified);
                assert_eq!(s.mean_auc, 0.0);
                assert_eq!(r.traces[i].outcome, Outcome::TimedOut);
            } else {
                assert!(!s.disqualified);
                assert_eq!(s.mean_auc, 1.0);
            }
        }
    }

    #[test]
    fn missing_file_is_a_dataset_error() {
        let d = SuiteDataset {
            id: "gone".into(),
            source: DatasetSource::Files {
                data: "/nonexistent/data.csv".into(),
                schema: "/nonexistent/schema.csv".into(),
            },
            budget_secs: 1.0,
        };
        let r = run_suite(&phase(vec![d]), |_| Ok(Box::new(Echo { sleep: Duration::ZERO }) as _), 1).unwrap();
        assert_eq!(r.traces[0].outcome, Outcome::DatasetError);
        assert!(r.scores[0].disqualified);
    }

    #[test]
    fn invalid_phase_rejected() {
        let mut p = phase(vec![toy("a", 1.0)]);
        p.blocks = 1;
        assert!(run_suite(&p, |_| Ok(Box::new(Echo { sleep: Duration::ZERO }) as _), 1).is_err());
    }
}
