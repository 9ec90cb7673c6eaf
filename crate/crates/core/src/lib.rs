//! Lifelong evaluation of binary classifiers on drifting tabular streams.
//!
//! A dataset is split into chronological blocks. At step `k` a predictor
//! learns from the newly revealed labeled block `k - 1` and scores block `k`;
//! each block is scored by AUC, averaged per dataset, and submissions are
//! ranked across datasets by average rank with duration as tie-break.
//!
//! The crate also ships the reference learner: an incrementally grown
//! gradient-boosted tree ensemble with pluggable drift policies.

pub mod baseline;
pub mod data;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod ranking;

pub use error::{Error, PredictorError, Result};
