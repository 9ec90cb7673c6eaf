//! Tabular stream data model: feature schemas, chronologically ordered
//! datasets, block plans and the synthetic drifting-stream generator.

mod blocks;
mod generator;
mod io;

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use blocks::{split_blocks, BlockPlan};
pub use generator::{generate_drift_stream, DriftGenSpec, DriftProfile, KindCounts};
pub use io::{load_dataset, load_unlabeled, write_dataset, write_rows, write_schema_file, MVC_SEPARATOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Numerical,
    Categorical,
    MultiValuedCategorical,
    Time,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [
        FeatureKind::Categorical,
        FeatureKind::Numerical,
        FeatureKind::MultiValuedCategorical,
        FeatureKind::Time,
    ];

    /// Token used in schema files.
    pub fn token(self) -> &'static str {
        match self {
            FeatureKind::Numerical => "num",
            FeatureKind::Categorical => "cat",
            FeatureKind::MultiValuedCategorical => "mvc",
            FeatureKind::Time => "time",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "num" => Ok(FeatureKind::Numerical),
            "cat" => Ok(FeatureKind::Categorical),
            "mvc" => Ok(FeatureKind::MultiValuedCategorical),
            "time" => Ok(FeatureKind::Time),
            other => Err(Error::Schema(format!("unknown feature kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

/// Ordered feature columns plus the name of the label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    label: String,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let mut seen = HashSet::new();
        for f in &features {
            if f.name == label {
                return Err(Error::Schema(format!(
                    "label column `{label}` also listed as a feature"
                )));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", f.name)));
            }
        }
        Ok(Self { features, label })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn count(&self, kind: FeatureKind) -> usize {
        self.features.iter().filter(|f| f.kind == kind).count()
    }
}

/// Time-ordered rows of raw string cells with binary labels.
///
/// Rows are never reordered after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChronoDataset {
    schema: FeatureSchema,
    rows: Vec<Vec<String>>,
    labels: Vec<u8>,
    provenance: String,
}

impl ChronoDataset {
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<Vec<String>>,
        labels: Vec<u8>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != schema.width()) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} cells, schema has {} features",
                rows[i].len(),
                schema.width()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidInput(format!(
                "row {i} has non-binary label {}",
                labels[i]
            )));
        }
        Ok(Self {
            schema,
            rows,
            labels,
            provenance: provenance.into(),
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column `col` restricted to `range`, as borrowed cells.
    pub fn column(&self, col: usize, range: Range<usize>) -> Vec<&str> {
        self.rows[range].iter().map(|r| r[col].as_str()).collect()
    }
}
