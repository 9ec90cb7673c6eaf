use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ensemble::{fit_initial, BoostedEnsemble, FitTrace};
use super::pool::{select_training_pool, TrainingPool};
use super::BaselineConfig;
use crate::data::FeatureSchema;
use crate::encoding::DatasetEncoder;
use crate::error::{PredictorError, Result};
use crate::harness::{Block, Predictor};

/// The boosted baseline as a harness predictor.
///
/// The first labeled block fits the initial ensemble; each later block
/// updates the categorical encoders, adds the block to the training pool
/// and appends trees fitted on the pool. A frozen predictor stops after the
/// initial fit: neither encoders nor trees change afterwards.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselinePredictor {
    id: String,
    config: BaselineConfig,
    frozen: bool,
    encoder: Option<DatasetEncoder>,
    ensemble: Option<BoostedEnsemble>,
    pool: TrainingPool,
    revealed: usize,
    #[serde(skip)]
    last_fit: Option<FitTrace>,
}

fn mix_seed(seed: u64, revealed: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (revealed as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl BaselinePredictor {
    pub fn new(id: impl Into<String>, config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            id: id.into(),
            pool: TrainingPool::new(config.policy),
            config,
            frozen: false,
            encoder: None,
            ensemble: None,
            revealed: 0,
            last_fit: None,
        })
    }

    /// Never extend after the initial fit.
    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn ensemble(&self) -> Option<&BoostedEnsemble> {
        self.ensemble.as_ref()
    }

    pub fn pool(&self) -> &TrainingPool {
        &self.pool
    }

    /// Labeled blocks seen so far.
    pub fn revealed(&self) -> usize {
        self.revealed
    }

    /// Loss trace of the most recent fit.
    pub fn last_fit(&self) -> Option<&FitTrace> {
        self.last_fit.as_ref()
    }

    /// Learn one newly revealed labeled block.
    pub fn observe(&mut self, block: usize, rows: &[Vec<String>], labels: &[u8], schema: &FeatureSchema) -> Result<()> {
        if self.frozen && self.ensemble.is_some() {
            self.revealed += 1;
            return Ok(());
        }
        let encoder = match &mut self.encoder {
            Some(e) => e,
            None => self.encoder.insert(DatasetEncoder::new(schema.clone(), self.config.encoding)?),
        };
        encoder.update(rows, labels)?;
        self.pool.push_block(block, rows, labels);
        let seed = mix_seed(self.config.seed, self.revealed);

        let trace = match &mut self.ensemble {
            None => {
                let x = encoder.transform(rows, 0)?;
                let (ensemble, trace) = fit_initial(&x, labels, &self.config, seed);
                self.ensemble = Some(ensemble);
                trace
            }
            Some(ensemble) => {
                let idx = select_training_pool(
                    &self.pool,
                    self.config.policy,
                    self.config.subsample_cap,
                    self.config.recency_decay,
                    seed,
                );
                let rows: Vec<Vec<String>> = idx.iter().map(|&i| self.pool.rows()[i].clone()).collect();
                let y: Vec<u8> = idx.iter().map(|&i| self.pool.labels()[i]).collect();
                let x = encoder.transform(&rows, 0)?;
                ensemble.extend(&x, &y, &self.config, self.revealed)
            }
        };
        self.last_fit = Some(trace);
        self.revealed += 1;
        Ok(())
    }

    /// Scores for unlabeled rows; 0.5 everywhere before the first fit.
    pub fn score(&mut self, rows: &[Vec<String>]) -> Result<Vec<f64>> {
        let (Some(encoder), Some(ensemble)) = (&mut self.encoder, &self.ensemble) else {
            return Ok(vec![0.5; rows.len()]);
        };
        if encoder.plan().co_encode && !self.frozen {
            encoder.observe_unlabeled(rows)?;
        }
        let x = encoder.transform(rows, 0)?;
        Ok(ensemble.predict_scores(&x))
    }
}

impl Predictor for BaselinePredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn learn(&mut self, block: &Block, labels: &[u8], schema: &FeatureSchema, _: Duration) -> Result<(), PredictorError> {
        self.observe(block.index, &block.rows, labels, schema)
            .map_err(|e| PredictorError::Failed(e.to_string()))
    }

    fn predict(&mut self, block: &Block, _: &FeatureSchema, _: Duration) -> Result<Vec<f64>, PredictorError> {
        self.score(&block.rows).map_err(|e| PredictorError::Failed(e.to_string()))
    }
}
