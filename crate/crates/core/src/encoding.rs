//! Categorical encoders and dataset-to-matrix conversion.
//!
//! Unseen or missing categories never fail: they encode to 0 for ordinal and
//! count encoders, and to the label prior for target-mean encoders.
//! Multi-valued cells are encoded whole (ordinal) or as the mean of their
//! token encodings (count, target mean); an empty cell encodes to 0.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::{ChronoDataset, FeatureKind, FeatureSchema, MVC_SEPARATOR};
use crate::error::{Error, Result};

pub const DEFAULT_SMOOTHING: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    Ordinal,
    Count,
    TargetMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum EncoderState {
    Ordinal { codes: BTreeMap<String, u64> },
    Count { counts: BTreeMap<String, u64> },
    TargetMean {
        stats: BTreeMap<String, (f64, u64)>,
        label_sum: f64,
        label_count: u64,
        smoothing: f64,
    },
}

/// Fitted state of one categorical encoder. Can be grown incrementally with
/// [`FittedEncoder::update`]; fitting on a concatenation equals fitting on the
/// first part and updating with the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEncoder {
    kind: EncoderKind,
    state: EncoderState,
    fitted_rows: usize,
}

pub fn fit_encoder(
    kind: EncoderKind,
    values: &[&str],
    labels: Option<&[u8]>,
    smoothing: f64,
) -> Result<FittedEncoder> {
    let mut enc = FittedEncoder::empty(kind, smoothing)?;
    enc.update(values, labels)?;
    Ok(enc)
}

impl FittedEncoder {
    pub fn empty(kind: EncoderKind, smoothing: f64) -> Result<Self> {
        let state = match kind {
            EncoderKind::Ordinal => EncoderState::Ordinal { codes: BTreeMap::new() },
            EncoderKind::Count => EncoderState::Count { counts: BTreeMap::new() },
            EncoderKind::TargetMean => {
                if !(smoothing.is_finite() && smoothing >= 0.0) {
                    return Err(Error::EncoderUsage(format!("smoothing must be >= 0, got {smoothing}")));
                }
                EncoderState::TargetMean {
                    stats: BTreeMap::new(),
                    label_sum: 0.0,
                    label_count: 0,
                    smoothing,
                }
            }
        };
        Ok(Self {
            kind,
            state,
            fitted_rows: 0,
        })
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn fitted_rows(&self) -> usize {
        self.fitted_rows
    }

    /// Fold more observations into the state. Empty values are skipped.
    pub fn update(&mut self, values: &[&str], labels: Option<&[u8]>) -> Result<()> {
        match &mut self.state {
            EncoderState::Ordinal { codes } => {
                for v in values.iter().filter(|v| !v.is_empty()) {
                    let next = codes.len() as u64 + 1;
                    codes.entry((*v).to_string()).or_insert(next);
                }
            }
            EncoderState::Count { counts } => {
                for v in values.iter().filter(|v| !v.is_empty()) {
                    *counts.entry((*v).to_string()).or_insert(0) += 1;
                }
            }
            EncoderState::TargetMean {
                stats,
                label_sum,
                label_count,
                ..
            } => {
                let labels = labels
                    .ok_or_else(|| Error::EncoderUsage("target-mean encoding requires labels".into()))?;
                if labels.len() != values.len() {
                    return Err(Error::EncoderUsage(format!(
                        "{} values but {} labels",
                        values.len(),
                        labels.len()
                    )));
                }
                for (v, &y) in values.iter().zip(labels) {
                    *label_sum += f64::from(y);
                    *label_count += 1;
                    if v.is_empty() {
                        continue;
                    }
                    let e = stats.entry((*v).to_string()).or_insert((0.0, 0));
                    e.0 += f64::from(y);
                    e.1 += 1;
                }
            }
        }
        self.fitted_rows += values.len();
        Ok(())
    }

    /// Global label mean seen so far; 0.5 before any label was seen.
    /// Meaningful only for target-mean encoders.
    pub fn prior(&self) -> f64 {
        match &self.state {
            EncoderState::TargetMean {
                label_sum,
                label_count,
                ..
            } if *label_count > 0 => label_sum / *label_count as f64,
            _ => 0.5,
        }
    }

    /// Value used for unseen or missing categories.
    pub fn fallback(&self) -> f64 {
        match self.kind {
            EncoderKind::Ordinal | EncoderKind::Count => 0.0,
            EncoderKind::TargetMean => self.prior(),
        }
    }

    pub fn encode(&self, value: &str) -> f64 {
        match &self.state {
            EncoderState::Ordinal { codes } => codes.get(value).map_or(0.0, |&c| c as f64),
            EncoderState::Count { counts } => counts.get(value).map_or(0.0, |&c| c as f64),
            EncoderState::TargetMean { stats, smoothing, .. } => {
                let prior = self.prior();
                match stats.get(value) {
                    Some(&(sum, count)) if count as f64 + smoothing > 0.0 => {
                        (sum + smoothing * prior) / (count as f64 + smoothing)
                    }
                    _ => prior,
                }
            }
        }
    }

    pub fn transform_column(&self, values: &[&str]) -> Vec<f64> {
        values.iter().map(|v| self.encode(v)).collect()
    }

    /// Encoding of a multi-valued cell.
    pub fn encode_multi(&self, cell: &str) -> f64 {
        if cell.is_empty() {
            return 0.0;
        }
        match self.kind {
            EncoderKind::Ordinal => self.encode(cell),
            EncoderKind::Count | EncoderKind::TargetMean => {
                let (sum, n) = cell
                    .split(MVC_SEPARATOR)
                    .fold((0.0, 0usize), |(s, n), t| (s + self.encode(t), n + 1));
                sum / n as f64
            }
        }
    }

    /// Ordinal code map, for inspection.
    pub fn codes(&self) -> Option<&BTreeMap<String, u64>> {
        match &self.state {
            EncoderState::Ordinal { codes } => Some(codes),
            _ => None,
        }
    }
}

/// Encoder choice per categorical feature kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingPlan {
    pub categorical: EncoderKind,
    pub multi_valued: EncoderKind,
    pub smoothing: f64,
    /// Fold label-free statistics of rows about to be predicted into the
    /// ordinal and count encoders before transforming them.
    pub co_encode: bool,
}

impl Default for EncodingPlan {
    fn default() -> Self {
        Self {
            categorical: EncoderKind::Ordinal,
            multi_valued: EncoderKind::Ordinal,
            smoothing: DEFAULT_SMOOTHING,
            co_encode: false,
        }
    }
}

/// Dense row-major matrix of encoded features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EncodedMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.cols, data)
    }
}

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    if cell.is_empty() {
        return Ok(0.0);
    }
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Encode {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

/// Per-column encoders for a whole schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEncoder {
    schema: FeatureSchema,
    plan: EncodingPlan,
    columns: Vec<Option<FittedEncoder>>,
}

impl DatasetEncoder {
    pub fn new(schema: FeatureSchema, plan: EncodingPlan) -> Result<Self> {
        let columns = schema
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Categorical => FittedEncoder::empty(plan.categorical, plan.smoothing).map(Some),
                FeatureKind::MultiValuedCategorical => {
                    FittedEncoder::empty(plan.multi_valued, plan.smoothing).map(Some)
                }
                FeatureKind::Numerical | FeatureKind::Time => Ok(None),
            })
            .collect::<Result<_>>()?;
        Ok(Self { schema, plan, columns })
    }

    pub fn plan(&self) -> &EncodingPlan {
        &self.plan
    }

    pub fn encoder(&self, col: usize) -> Option<&FittedEncoder> {
        self.columns[col].as_ref()
    }

    /// Fold labeled rows into every categorical encoder.
    pub fn update(&mut self, rows: &[Vec<String>], labels: &[u8]) -> Result<()> {
        self.fold(rows, Some(labels), false)
    }

    /// Fold unlabeled rows into the label-free (ordinal, count) encoders.
    pub fn observe_unlabeled(&mut self, rows: &[Vec<String>]) -> Result<()> {
        self.fold(rows, None, true)
    }

    fn fold(&mut self, rows: &[Vec<String>], labels: Option<&[u8]>, label_free_only: bool) -> Result<()> {
        for (col, enc) in self.columns.iter_mut().enumerate() {
            let Some(enc) = enc else { continue };
            if label_free_only && enc.kind() == EncoderKind::TargetMean {
                continue;
            }
            let kind = self.schema.features()[col].kind;
            let tokenize = kind == FeatureKind::MultiValuedCategorical && enc.kind() != EncoderKind::Ordinal;
            if tokenize {
                let mut tokens = Vec::new();
                let mut token_labels = Vec::new();
                for (i, row) in rows.iter().enumerate() {
                    let cell = row[col].as_str();
                    if cell.is_empty() {
                        continue;
                    }
                    for t in cell.split(MVC_SEPARATOR) {
                        tokens.push(t);
                        if let Some(l) = labels {
                            token_labels.push(l[i]);
                        }
                    }
                }
                enc.update(&tokens, labels.map(|_| token_labels.as_slice()))?;
            } else {
                let values: Vec<&str> = rows.iter().map(|r| r[col].as_str()).collect();
                enc.update(&values, labels)?;
            }
        }
        Ok(())
    }

    /// Encode rows; `first_row` only labels error messages.
    pub fn transform(&self, rows: &[Vec<String>], first_row: usize) -> Result<EncodedMatrix> {
        let cols = self.schema.width();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            for (col, feature) in self.schema.features().iter().enumerate() {
                let cell = row[col].as_str();
                let v = match (feature.kind, &self.columns[col]) {
                    (FeatureKind::Numerical | FeatureKind::Time, _) => {
                        parse_number(cell, first_row + i, &feature.name)?
                    }
                    (FeatureKind::Categorical, Some(enc)) => {
                        if cell.is_empty() {
                            enc.fallback()
                        } else {
                            enc.encode(cell)
                        }
                    }
                    (FeatureKind::MultiValuedCategorical, Some(enc)) => enc.encode_multi(cell),
                    (_, None) => unreachable!("categorical columns always carry an encoder"),
                };
                data.push(v);
            }
        }
        Ok(EncodedMatrix::new(rows.len(), cols, data))
    }
}

/// Fit encoders on `fit_rows` of the dataset and encode every row.
pub fn encode_dataset(
    dataset: &ChronoDataset,
    plan: EncodingPlan,
    fit_rows: Range<usize>,
) -> Result<(EncodedMatrix, DatasetEncoder)> {
    if fit_rows.start > fit_rows.end || fit_rows.end > dataset.len() {
        return Err(Error::InvalidInput(format!(
            "fit range {fit_rows:?} outside dataset of {} rows",
            dataset.len()
        )));
    }
    let mut encoder = DatasetEncoder::new(dataset.schema().clone(), plan)?;
    encoder.update(&dataset.rows()[fit_rows.clone()], &dataset.labels()[fit_rows])?;
    let matrix = encoder.transform(dataset.rows(), 0)?;
    Ok((matrix, encoder))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Feature;
    use proptest::prelude::*;

    fn count_oracle(values: &[&str]) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        for v in values {
            *m.entry(v.to_string()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn ordinal_first_appearance() {
        let enc = fit_encoder(EncoderKind::Ordinal, &["a", "b", "a", "c"], None, 0.0).unwrap();
        let codes = enc.codes().unwrap();
        assert_eq!(codes["a"], 1);
        assert_eq!(codes["b"], 2);
        assert_eq!(codes["c"], 3);
        assert_eq!(enc.transform_column(&["c", "z"]), vec![3.0, 0.0]);
    }

    #[test]
    fn count_matches_oracle() {
        let values = ["a", "b", "a", "c"];
        let enc = fit_encoder(EncoderKind::Count, &values, None, 0.0).unwrap();
        let oracle = count_oracle(&values);
        for (k, v) in &oracle {
            assert_eq!(enc.encode(k), *v as f64);
        }
        assert_eq!(enc.transform_column(&["a", "a"]), vec![2.0, 2.0]);
        assert_eq!(enc.encode("zzz"), 0.0);
    }

    #[test]
    fn target_mean_arithmetic() {
        let enc = fit_encoder(EncoderKind::TargetMean, &["a", "a", "b"], Some(&[1, 0, 1]), 0.0).unwrap();
        assert!((enc.prior() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(enc.encode("a"), 0.5);
        assert_eq!(enc.encode("b"), 1.0);
        assert!((enc.encode("q") - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn target_mean_unseen_is_prior() {
        // 3 of 5 positive -> prior 0.6; "a" has labels (1, 0) -> mean 0.5 at m = 0.
        let enc = fit_encoder(
            EncoderKind::TargetMean,
            &["a", "a", "x", "y", "z"],
            Some(&[1, 0, 1, 1, 0]),
            0.0,
        )
        .unwrap();
        assert!((enc.prior() - 0.6).abs() < 1e-15);
        let out = enc.transform_column(&["a", "q"]);
        assert_eq!(out[0], 0.5);
        assert!((out[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn target_mean_smoothing() {
        // (1 + 10 * 2/3) / (2 + 10) for "a" with m = 10.
        let enc = fit_encoder(EncoderKind::TargetMean, &["a", "a", "b"], Some(&[1, 0, 1]), 10.0).unwrap();
        let expected = (1.0 + 10.0 * (2.0 / 3.0)) / 12.0;
        assert!((enc.encode("a") - expected).abs() < 1e-15);
    }

    #[test]
    fn target_mean_requires_labels() {
        let err = fit_encoder(EncoderKind::TargetMean, &["a"], None, 10.0).unwrap_err();
        assert!(matches!(err, Error::EncoderUsage(_)));
        let err = fit_encoder(EncoderKind::TargetMean, &["a", "b"], Some(&[1]), 10.0).unwrap_err();
        assert!(matches!(err, Error::EncoderUsage(_)));
    }

    fn dataset(kinds: &[FeatureKind], rows: Vec<Vec<&str>>, labels: Vec<u8>) -> ChronoDataset {
        let features = kinds
            .iter()
            .enumerate()
            .map(|(i, &kind)| Feature {
                name: format!("f{i}"),
                kind,
            })
            .collect();
        let schema = FeatureSchema::new(features, "y").unwrap();
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(String::from).collect())
            .collect();
        ChronoDataset::new(schema, rows, labels, "test").unwrap()
    }

    #[test]
    fn numeric_columns_parse_with_missing_as_zero() {
        let ds = dataset(&[FeatureKind::Numerical], vec![vec!["1.5"], vec!["2.0"], vec![""]], vec![0, 1, 0]);
        let (m, _) = encode_dataset(&ds, EncodingPlan::default(), 0..3).unwrap();
        assert_eq!(m.row(0), &[1.5]);
        assert_eq!(m.row(1), &[2.0]);
        assert_eq!(m.row(2), &[0.0]);
    }

    #[test]
    fn unparseable_numeric_names_row_and_column() {
        let ds = dataset(&[FeatureKind::Numerical], vec![vec!["1"], vec!["x1"]], vec![0, 1]);
        let err = encode_dataset(&ds, EncodingPlan::default(), 0..2).unwrap_err();
        match err {
            Error::Encode { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (1, "f0", "x1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mvc_count_is_mean_of_token_counts() {
        // token counts: a = 2, b = 1 -> "a|b" = 1.5, "a" = 2.
        let ds = dataset(&[FeatureKind::MultiValuedCategorical], vec![vec!["a|b"], vec!["a"], vec![""]], vec![0, 1, 0]);
        let plan = EncodingPlan {
            multi_valued: EncoderKind::Count,
            ..EncodingPlan::default()
        };
        let (m, _) = encode_dataset(&ds, plan, 0..2).unwrap();
        assert_eq!(m.row(0), &[1.5]);
        assert_eq!(m.row(1), &[2.0]);
        assert_eq!(m.row(2), &[0.0]);
    }

    #[test]
    fn mvc_ordinal_codes_whole_cell() {
        let ds = dataset(&[FeatureKind::MultiValuedCategorical], vec![vec!["a|b"], vec!["a"], vec!["a|b"]], vec![0, 1, 0]);
        let (m, _) = encode_dataset(&ds, EncodingPlan::default(), 0..3).unwrap();
        assert_eq!((m.get(0, 0), m.get(1, 0), m.get(2, 0)), (1.0, 2.0, 1.0));
    }

    #[test]
    fn time_passes_through() {
        let ds = dataset(&[FeatureKind::Time, FeatureKind::Categorical], vec![vec!["1530000000", "u"], vec!["1530000060", "v"]], vec![0, 1]);
        let (m, _) = encode_dataset(&ds, EncodingPlan::default(), 0..1).unwrap();
        assert_eq!(m.row(0), &[1_530_000_000.0, 1.0]);
        assert_eq!(m.row(1), &[1_530_000_060.0, 0.0]);
    }

    #[test]
    fn co_encoding_only_touches_label_free_encoders() {
        let schema = FeatureSchema::new(
            vec![
                Feature { name: "c".into(), kind: FeatureKind::Categorical },
                Feature { name: "m".into(), kind: FeatureKind::MultiValuedCategorical },
            ],
            "y",
        )
        .unwrap();
        let plan = EncodingPlan {
            categorical: EncoderKind::Count,
            multi_valued: EncoderKind::TargetMean,
            smoothing: 0.0,
            co_encode: true,
        };
        let mut enc = DatasetEncoder::new(schema, plan).unwrap();
        enc.update(&[vec!["a".into(), "t".into()]], &[1]).unwrap();
        let before = enc.encoder(1).unwrap().clone();
        enc.observe_unlabeled(&[vec!["a".into(), "t|u".into()]]).unwrap();
        assert_eq!(enc.encoder(0).unwrap().encode("a"), 2.0);
        assert_eq!(enc.encoder(1).unwrap(), &before);
    }

    proptest! {
        #[test]
        fn transform_preserves_length(values in prop::collection::vec("[a-e]{0,2}", 0..50), probe in prop::collection::vec("[a-g]{0,2}", 0..50)) {
            let v: Vec<&str> = values.iter().map(String::as_str).collect();
            let p: Vec<&str> = probe.iter().map(String::as_str).collect();
            let labels: Vec<u8> = (0..v.len()).map(|i| (i % 2) as u8).collect();
            for kind in [EncoderKind::Ordinal, EncoderKind::Count, EncoderKind::TargetMean] {
                let enc = fit_encoder(kind, &v, Some(&labels), 3.0).unwrap();
                prop_assert_eq!(enc.transform_column(&p).len(), p.len());
            }
        }

        #[test]
        fn target_mean_within_prior_and_means(
            pairs in prop::collection::vec(("[a-d]", 0u8..2), 1..80),
            m in 0.0f64..20.0,
        ) {
            let values: Vec<&str> = pairs.iter().map(|(v, _)| v.as_str()).collect();
            let labels: Vec<u8> = pairs.iter().map(|(_, y)| *y).collect();
            let enc = fit_encoder(EncoderKind::TargetMean, &values, Some(&labels), m).unwrap();
            let prior = enc.prior();
            let mut lo = prior;
            let mut hi = prior;
            for v in ["a", "b", "c", "d"] {
                let idx: Vec<usize> = (0..values.len()).filter(|&i| values[i] == v).collect();
                if idx.is_empty() { continue; }
                let mean = idx.iter().map(|&i| f64::from(labels[i])).sum::<f64>() / idx.len() as f64;
                lo = lo.min(mean);
                hi = hi.max(mean);
            }
            prop_assert!((0.0..=1.0).contains(&lo) && hi <= 1.0);
            for v in ["a", "b", "c", "d", "zz"] {
                let e = enc.encode(v);
                prop_assert!(e >= lo - 1e-12 && e <= hi + 1e-12, "{} not in [{}, {}]", e, lo, hi);
            }
        }

        #[test]
        fn encoders_ignore_rows_after_fit_range(
            cells in prop::collection::vec("[a-e]", 4..40),
            tail in prop::collection::vec("[a-z]", 1..20),
            k in 1usize..4,
        ) {
            let mut rows: Vec<Vec<&str>> = cells.iter().map(|c| vec![c.as_str(), c.as_str()]).collect();
            let labels: Vec<u8> = (0..rows.len()).map(|i| (i % 3 == 0) as u8).collect();
            let ds1 = dataset(&[FeatureKind::Categorical, FeatureKind::MultiValuedCategorical], rows.clone(), labels.clone());
            let n = rows.len();
            for (i, t) in tail.iter().enumerate() {
                let r = k + i % (n - k);
                rows[r] = vec![t.as_str(), t.as_str()];
            }
            let ds2 = dataset(&[FeatureKind::Categorical, FeatureKind::MultiValuedCategorical], rows, labels);
            let plan = EncodingPlan { categorical: EncoderKind::TargetMean, multi_valued: EncoderKind::Count, smoothing: 2.0, co_encode: false };
            for plan in [plan, EncodingPlan::default()] {
                let (_, e1) = encode_dataset(&ds1, plan, 0..k).unwrap();
                let (_, e2) = encode_dataset(&ds2, plan, 0..k).unwrap();
                prop_assert_eq!(e1, e2);
            }
        }
    }
}
