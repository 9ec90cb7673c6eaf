//! The lifelong predict-then-reveal loop.
//!
//! At step `k` (1 ≤ k < N) the predictor first learns the newly revealed
//! labeled block `k - 1`, then scores block `k`. Only the time spent inside
//! the predictor counts against the dataset budget. A predictor that runs
//! past the budget is abandoned and the dataset scores 0.

mod subprocess;
mod suite;

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::data::{BlockPlan, ChronoDataset, FeatureSchema};
use crate::error::{Error, PredictorError, Result};
use crate::metrics::{aggregate_dataset, block_auc, BlockScore, DatasetScore};

pub use subprocess::SubprocessPredictor;
pub use suite::{run_suite, DatasetSource, Phase, PhaseConfig, SuiteDataset, SuiteResult};

/// Extra wall time the harness waits past the remaining budget before it
/// gives up on an unresponsive predictor.
pub const TIMEOUT_GRACE: Duration = Duration::from_secs(1);

/// One chronological block handed to a predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub index: usize,
    /// Dataset row index of the first row.
    pub first_row: usize,
    pub rows: Vec<Vec<String>>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// A learner evaluated by the harness. It keeps all cross-step state itself:
/// `learn` only ever receives the block revealed at the current step.
pub trait Predictor: Send {
    fn id(&self) -> &str;

    fn learn(
        &mut self,
        block: &Block,
        labels: &[u8],
        schema: &FeatureSchema,
        remaining: Duration,
    ) -> Result<(), PredictorError>;

    /// One finite score per row of `block`.
    fn predict(&mut self, block: &Block, schema: &FeatureSchema, remaining: Duration)
        -> Result<Vec<f64>, PredictorError>;

    /// Wall time spent on harness-side I/O since the last call, excluded from
    /// the budget. Reading it resets it.
    fn take_overhead(&mut self) -> Duration {
        Duration::ZERO
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn learn(
        &mut self,
        block: &Block,
        labels: &[u8],
        schema: &FeatureSchema,
        remaining: Duration,
    ) -> Result<(), PredictorError> {
        (**self).learn(block, labels, schema, remaining)
    }

    fn predict(
        &mut self,
        block: &Block,
        schema: &FeatureSchema,
        remaining: Duration,
    ) -> Result<Vec<f64>, PredictorError> {
        (**self).predict(block, schema, remaining)
    }

    fn take_overhead(&mut self) -> Duration {
        (**self).take_overhead()
    }
}

/// Scores every row with the same value; the chance-level reference.
#[derive(Debug, Clone)]
pub struct ConstantPredictor {
    id: String,
    value: f64,
}

impl ConstantPredictor {
    pub fn new(id: impl Into<String>, value: f64) -> Self {
        Self { id: id.into(), value }
    }
}

impl Predictor for ConstantPredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn learn(&mut self, _: &Block, _: &[u8], _: &FeatureSchema, _: Duration) -> Result<(), PredictorError> {
        Ok(())
    }

    fn predict(&mut self, block: &Block, _: &FeatureSchema, _: Duration) -> Result<Vec<f64>, PredictorError> {
        Ok(vec![self.value; block.len()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    TimedOut,
    PredictorError,
    /// The dataset could not be loaded or split; the predictor never ran.
    DatasetError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Labeled rows revealed to the predictor so far, this step included.
    pub trained_rows: usize,
    pub learned_block: usize,
    pub predicted_block: usize,
    pub score: BlockScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationTrace {
    pub dataset: String,
    pub predictor: String,
    pub blocks: usize,
    pub budget_secs: f64,
    pub steps: Vec<StepRecord>,
    pub total_elapsed_secs: f64,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl EvaluationTrace {
    /// Dataset score; anything but a completed run scores 0 and is disqualified.
    pub fn score(&self) -> DatasetScore {
        let blocks = self.steps.iter().map(|s| s.score.clone()).collect();
        let mut score = aggregate_dataset(self.dataset.clone(), blocks, self.budget_secs);
        score.total_elapsed_secs = self.total_elapsed_secs;
        if self.outcome != Outcome::Completed {
            score.disqualify();
        }
        score
    }

    pub(crate) fn failed(dataset: &str, predictor: &str, blocks: usize, budget_secs: f64, message: String) -> Self {
        Self {
            dataset: dataset.to_string(),
            predictor: predictor.to_string(),
            blocks,
            budget_secs,
            steps: Vec::new(),
            total_elapsed_secs: 0.0,
            outcome: Outcome::DatasetError,
            message: Some(message),
        }
    }
}

enum Call {
    Learn(Block, Vec<u8>),
    Predict(Block),
}

type Reply = (Result<Option<Vec<f64>>, PredictorError>, Duration);

/// Owns the predictor on a separate thread so an overrunning call can be
/// abandoned.
struct Worker {
    calls: mpsc::Sender<(Call, Duration)>,
    replies: mpsc::Receiver<Reply>,
}

impl Worker {
    fn spawn(mut predictor: Box<dyn Predictor>, schema: FeatureSchema) -> Result<Self> {
        let (call_tx, call_rx) = mpsc::channel::<(Call, Duration)>();
        let (reply_tx, reply_rx) = mpsc::channel::<Reply>();
        thread::Builder::new()
            .name(format!("predictor-{}", predictor.id()))
            .spawn(move || {
                for (call, remaining) in call_rx {
                    let start = Instant::now();
                    let result = match call {
                        Call::Learn(block, labels) => predictor
                            .learn(&block, &labels, &schema, remaining)
                            .map(|()| None),
                        Call::Predict(block) => predictor.predict(&block, &schema, remaining).map(Some),
                    };
                    let elapsed = start.elapsed().saturating_sub(predictor.take_overhead());
                    if reply_tx.send((result, elapsed)).is_err() {
                        break;
                    }
                }
            })
            .map_err(|e| Error::io("<predictor thread>", e))?;
        Ok(Self {
            calls: call_tx,
            replies: reply_rx,
        })
    }

    /// `None` when no reply arrived within `remaining` plus the grace period.
    fn call(&self, call: Call, remaining: Duration) -> Option<Reply> {
        if self.calls.send((call, remaining)).is_err() {
            return Some((Err(PredictorError::Failed("predictor thread exited".into())), Duration::ZERO));
        }
        match self.replies.recv_timeout(remaining + TIMEOUT_GRACE) {
            Ok(reply) => Some(reply),
            Err(mpsc::RecvTimeoutError::Timeout) => None,
            Err(mpsc::RecvTimeoutError::Disconnected) => Some((
                Err(PredictorError::Failed("predictor panicked".into())),
                Duration::ZERO,
            )),
        }
    }
}

fn block_of(dataset: &ChronoDataset, plan: &BlockPlan, k: usize) -> Block {
    let range = plan.block(k);
    Block {
        index: k,
        first_row: range.start,
        rows: dataset.rows()[range].to_vec(),
    }
}

fn validate_scores(scores: &[f64], expected: usize) -> Result<(), PredictorError> {
    if scores.len() != expected {
        return Err(PredictorError::Malformed(format!(
            "{} scores for {expected} rows",
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(PredictorError::Malformed(format!("score {i} is not finite")));
    }
    Ok(())
}

/// Run the lifelong protocol for one dataset.
pub fn run_lifelong(
    dataset_id: &str,
    dataset: &ChronoDataset,
    plan: &BlockPlan,
    predictor: Box<dyn Predictor>,
    budget: Duration,
) -> Result<EvaluationTrace> {
    if plan.total_rows() != dataset.len() {
        return Err(Error::InvalidPlan(format!(
            "plan covers {} rows, dataset has {}",
            plan.total_rows(),
            dataset.len()
        )));
    }
    if budget.is_zero() {
        return Err(Error::Config("budget must be positive".into()));
    }

    let mut trace = EvaluationTrace {
        dataset: dataset_id.to_string(),
        predictor: predictor.id().to_string(),
        blocks: plan.len(),
        budget_secs: budget.as_secs_f64(),
        steps: Vec::new(),
        total_elapsed_secs: 0.0,
        outcome: Outcome::Completed,
        message: None,
    };
    let worker = Worker::spawn(predictor, dataset.schema().clone())?;
    let mut used = Duration::ZERO;
    let mut trained_rows = 0;

    for k in 1..plan.len() {
        let mut step_time = Duration::ZERO;
        let learned = block_of(dataset, plan, k - 1);
        let labels = dataset.labels()[plan.block(k - 1)].to_vec();
        trained_rows += learned.len();
        let to_predict = block_of(dataset, plan, k);
        let expected = to_predict.len();

        let mut scores = None;
        for call in [Call::Learn(learned, labels), Call::Predict(to_predict)] {
            let remaining = budget.saturating_sub(used);
            let Some((result, elapsed)) = worker.call(call, remaining) else {
                used = budget + TIMEOUT_GRACE;
                trace.total_elapsed_secs = used.as_secs_f64();
                trace.outcome = Outcome::TimedOut;
                trace.message = Some(format!("no response within the budget at step {k}"));
                return Ok(trace);
            };
            used += elapsed;
            step_time += elapsed;
            match result {
                Err(PredictorError::Timeout) => {
                    trace.total_elapsed_secs = used.max(budget).as_secs_f64();
                    trace.outcome = Outcome::TimedOut;
                    trace.message = Some(format!("predictor stopped at the budget at step {k}"));
                    return Ok(trace);
                }
                Err(e) => {
                    trace.total_elapsed_secs = used.as_secs_f64();
                    trace.outcome = Outcome::PredictorError;
                    trace.message = Some(format!("step {k}: {e}"));
                    return Ok(trace);
                }
                Ok(s) => scores = s.or(scores),
            }
            if used > budget {
                trace.total_elapsed_secs = used.as_secs_f64();
                trace.outcome = Outcome::TimedOut;
                trace.message = Some(format!("budget exceeded at step {k}"));
                return Ok(trace);
            }
        }

        let scores = scores.expect("predict call returns scores");
        if let Err(e) = validate_scores(&scores, expected) {
            trace.total_elapsed_secs = used.as_secs_f64();
            trace.outcome = Outcome::PredictorError;
            trace.message = Some(format!("step {k}: {e}"));
            return Ok(trace);
        }
        let (auc, degenerate) = block_auc(&dataset.labels()[plan.block(k)], &scores)?;
        trace.steps.push(StepRecord {
            step: k,
            trained_rows,
            learned_block: k - 1,
            predicted_block: k,
            score: BlockScore {
                block: k,
                auc,
                elapsed_secs: step_time.as_secs_f64(),
                degenerate,
            },
        });
    }
    trace.total_elapsed_secs = used.as_secs_f64();
    Ok(trace)
}
