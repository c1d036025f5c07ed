//! Tabular datasets with class labels and a fixed train/test partition.
//!
//! Categorical columns are ordinal-encoded at ingest, so every cell is an
//! `f64` from here on. Feature ranges always span all rows, train and test.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Quantitative,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    pub range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_names: Option<Vec<String>>,
}

impl FeatureMeta {
    pub fn min(&self) -> f64 {
        self.range[0]
    }

    pub fn max(&self) -> f64 {
        self.range[1]
    }

    pub fn width(&self) -> f64 {
        self.range[1] - self.range[0]
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == FeatureKind::Categorical
    }

    fn validate(&self) -> Result<()> {
        if !(self.range[0] <= self.range[1]) {
            return Err(Error::InvalidDataset(format!(
                "feature `{}` has range [{}, {}]",
                self.name, self.range[0], self.range[1]
            )));
        }
        if self.kind == FeatureKind::Categorical {
            let n = self.category_names.as_ref().map_or(0, Vec::len);
            if n == 0 {
                return Err(Error::InvalidDataset(format!(
                    "categorical feature `{}` has no categories",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<FeatureMeta>,
    pub classes: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    split: Vec<Split>,
}

impl Dataset {
    /// Builds a dataset and recomputes feature ranges from the rows.
    ///
    /// With zero rows the ranges in `features` are kept as given, which is
    /// how a schema-only dataset (a forest imported without data) is built.
    /// Categorical ranges always cover every declared category.
    pub fn new(
        name: impl Into<String>,
        mut features: Vec<FeatureMeta>,
        classes: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        split: Vec<Split>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::NoFeatures);
        }
        if rows.len() != labels.len() || rows.len() != split.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows, {} labels, {} split flags",
                rows.len(),
                labels.len(),
                split.len()
            )));
        }
        for (i, (row, &label)) in rows.iter().zip(&labels).enumerate() {
            if row.len() != features.len() {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} values, expected {}",
                    row.len(),
                    features.len()
                )));
            }
            if label >= classes.len() {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has label {label} but only {} classes",
                    classes.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("row {i} has non-finite value {v}")));
            }
        }
        if !rows.is_empty() {
            for (f, meta) in features.iter_mut().enumerate() {
                let (lo, hi) = rows.iter().map(|r| r[f]).fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), v| (lo.min(v), hi.max(v)),
                );
                meta.range = [lo, hi];
                if let Some(names) = &meta.category_names {
                    meta.range = [0.0, (names.len() - 1) as f64];
                    if lo < 0.0 || hi > meta.range[1] {
                        return Err(Error::InvalidDataset(format!(
                            "categorical feature `{}` has codes outside [0, {}]",
                            meta.name, meta.range[1]
                        )));
                    }
                }
            }
        }
        for meta in &features {
            meta.validate()?;
        }
        Ok(Self {
            name: name.into(),
            features,
            classes,
            rows,
            labels,
            split,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split_of(&self, i: usize) -> Split {
        self.split[i]
    }

    pub fn splits(&self) -> &[Split] {
        &self.split
    }

    /// Row indices belonging to `split`, ascending.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| self.split[i] == split).collect()
    }

    /// All values of one feature column, in row order.
    pub fn column(&self, feature: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[feature]).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    /// The same schema with every row dropped.
    pub fn schema_only(&self) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.clone(),
            classes: self.classes.clone(),
            rows: Vec::new(),
            labels: Vec::new(),
            split: Vec::new(),
        }
    }
}

/// How to read an uploaded CSV.
#[derive(Clone, Debug)]
pub struct IngestOptions {
    pub name: String,
    /// Label column; the last column when `None`.
    pub label: Option<String>,
    /// Columns to encode as categorical even when every cell is numeric.
    pub categorical: Vec<String>,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            name: "dataset".to_string(),
            label: None,
            categorical: Vec::new(),
            test_fraction: 0.3,
            seed: 0,
        }
    }
}

/// Parses a UTF-8, comma-separated file with a header row.
pub fn ingest_csv(bytes: &[u8], opts: &IngestOptions) -> Result<Dataset> {
    if !(opts.test_fraction > 0.0 && opts.test_fraction < 1.0) {
        return Err(Error::InvalidParams(format!(
            "test_fraction {} must lie in (0, 1)",
            opts.test_fraction
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyInput);
    }

    let mut records: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                if let csv::ErrorKind::UnequalLengths {
                    pos,
                    expected_len,
                    len,
                } = e.kind()
                {
                    return Err(Error::NonRectangular {
                        line: pos.as_ref().map_or(0, |p| p.line()),
                        expected: *expected_len as usize,
                        found: *len as usize,
                    });
                }
                return Err(e.into());
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }

    let label_col = match &opts.label {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingLabel(name.clone()))?,
        None => header.len() - 1,
    };
    if header.len() < 2 {
        return Err(Error::NoFeatures);
    }

    for (line, rec) in &records {
        if let Some(col) = rec.iter().position(String::is_empty) {
            return Err(Error::Unparseable {
                line: *line,
                column: header[col].clone(),
                value: String::new(),
            });
        }
    }

    let class_set: BTreeSet<&str> = records.iter().map(|(_, r)| r[label_col].as_str()).collect();
    if class_set.len() < 2 {
        return Err(Error::TooFewClasses(class_set.len()));
    }
    let classes: Vec<String> = class_set.iter().map(|s| s.to_string()).collect();
    let class_of: BTreeMap<&str, usize> = class_set.iter().enumerate().map(|(i, s)| (*s, i)).collect();

    let mut features = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (col, name) in header.iter().enumerate() {
        if col == label_col {
            continue;
        }
        let forced = opts.categorical.iter().any(|c| c == name);
        let numeric: Option<Vec<f64>> = if forced {
            None
        } else {
            records
                .iter()
                .map(|(_, r)| r[col].parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        };
        match numeric {
            Some(values) => {
                features.push(FeatureMeta {
                    name: name.clone(),
                    kind: FeatureKind::Quantitative,
                    range: [0.0, 0.0],
                    category_names: None,
                });
                columns.push(values);
            }
            None => {
                let cats: BTreeSet<&str> = records.iter().map(|(_, r)| r[col].as_str()).collect();
                let code: BTreeMap<&str, usize> = cats.iter().enumerate().map(|(i, s)| (*s, i)).collect();
                features.push(FeatureMeta {
                    name: name.clone(),
                    kind: FeatureKind::Categorical,
                    range: [0.0, (cats.len() - 1) as f64],
                    category_names: Some(cats.iter().map(|s| s.to_string()).collect()),
                });
                columns.push(records.iter().map(|(_, r)| code[r[col].as_str()] as f64).collect());
            }
        }
    }

    let n = records.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let labels: Vec<usize> = records.iter().map(|(_, r)| class_of[r[label_col].as_str()]).collect();
    let split = stratified_split(&labels, classes.len(), opts.test_fraction, opts.seed);
    Dataset::new(opts.name.clone(), features, classes, rows, labels, split)
}

/// Per-class shuffled split; each class with at least two rows keeps one
/// training row.
pub fn stratified_split(labels: &[usize], n_classes: usize, test_fraction: f64, seed: u64) -> Vec<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = vec![Split::Train; labels.len()];
    for class in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let mut n_test = (test_fraction * idx.len() as f64).round() as usize;
        if idx.len() >= 2 {
            n_test = n_test.min(idx.len() - 1);
        } else {
            n_test = 0;
        }
        for &i in &idx[..n_test] {
            split[i] = Split::Test;
        }
    }
    split
}
