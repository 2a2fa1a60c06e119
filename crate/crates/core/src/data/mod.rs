//! Dataset ingestion and preprocessing: CSV loading, trimming, systematic
//! sampling into train/validation/test splits, constant-feature removal,
//! optional quantile transform and standardization.

mod quantile;
pub mod synthetic;

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::quantile_sorted;

pub use quantile::QuantileTransform;
pub use synthetic::{generate, SyntheticSpec};

/// Features whose training standard deviation falls below this are dropped.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset file not found: {0}")]
    MissingFile(String),
    #[error("failed to parse {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("label column `{0}` not present in header")]
    MissingLabelColumn(String),
    #[error("unknown label value `{value}` at data row {row}")]
    UnknownLabel { value: String, row: usize },
    #[error("non-numeric feature column `{0}` rejected by schema")]
    NonNumericColumn(String),
    #[error("no usable numeric feature columns")]
    NoFeatures,
    #[error("table has no rows")]
    Empty,
    #[error("invalid split specification: {0}")]
    InvalidSpec(String),
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("all features are constant on the training split")]
    AllConstant,
    #[error("empty label list")]
    NoLabels,
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Attack,
}

impl Label {
    pub fn is_attack(self) -> bool {
        self == Label::Attack
    }
}

/// How the label column of a CSV file maps onto normal/attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSchema {
    pub label_column: String,
    pub normal_labels: Vec<String>,
    /// When absent, every label that is not normal counts as an attack.
    /// When present, labels outside both lists are rejected.
    #[serde(default)]
    pub attack_labels: Option<Vec<String>>,
    /// Drop non-numeric feature columns instead of failing on them.
    #[serde(default = "default_true")]
    pub drop_non_numeric: bool,
}

fn default_true() -> bool {
    true
}

impl LabelSchema {
    pub fn new(label_column: impl Into<String>, normal_labels: &[&str]) -> Self {
        LabelSchema {
            label_column: label_column.into(),
            normal_labels: normal_labels.iter().map(|s| s.to_string()).collect(),
            attack_labels: None,
            drop_non_numeric: true,
        }
    }

    fn map(&self, raw: &str, row: usize) -> Result<Label, DataError> {
        let raw = raw.trim();
        if self.normal_labels.iter().any(|l| l == raw) {
            return Ok(Label::Normal);
        }
        match &self.attack_labels {
            None => Ok(Label::Attack),
            Some(attacks) if attacks.iter().any(|l| l == raw) => Ok(Label::Attack),
            Some(_) => Err(DataError::UnknownLabel {
                value: raw.to_string(),
                row,
            }),
        }
    }
}

/// Labelled numeric table as read from disk. Missing cells are `NaN`.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub name: String,
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl RawTable {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
    ) -> Result<Self, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        if feature_names.is_empty() {
            return Err(DataError::NoFeatures);
        }
        if labels.len() != rows.len() {
            return Err(DataError::InvalidSpec(format!(
                "{} labels for {} rows",
                labels.len(),
                rows.len()
            )));
        }
        for row in &rows {
            if row.len() != feature_names.len() {
                return Err(DataError::DimensionMismatch {
                    expected: feature_names.len(),
                    got: row.len(),
                });
            }
        }
        Ok(RawTable {
            name: name.into(),
            feature_names,
            rows,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Columns with (population) variance below the floor over their
    /// non-missing values. These are removed during preprocessing.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&j| {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .map(|r| r[j])
                    .filter(|v| v.is_finite())
                    .collect();
                column_std(&vals) < STD_FLOOR
            })
            .collect()
    }
}

fn column_std(vals: &[f64]) -> f64 {
    if vals.is_empty() {
        return 0.0;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn parse_cell(cell: &str) -> Option<Option<f64>> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") || t == "?"
    {
        return Some(None);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(Some(v)),
        // infinities are treated as missing measurements
        Ok(_) => Some(None),
        Err(_) => None,
    }
}

/// Reads a header-first delimited file. Non-numeric feature columns are
/// dropped (or rejected, depending on the schema); the label column is
/// mapped to [`Label`].
pub fn load_dataset(path: impl AsRef<Path>, schema: &LabelSchema) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    if !path.exists() {
        return Err(DataError::MissingFile(pstr));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| DataError::Parse {
            path: pstr.clone(),
            reason: e.to_string(),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Parse {
            path: pstr.clone(),
            reason: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == &schema.label_column)
        .ok_or_else(|| DataError::MissingLabelColumn(schema.label_column.clone()))?;

    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    let mut numeric = vec![true; header.len()];
    let mut labels = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse {
            path: pstr.clone(),
            reason: e.to_string(),
        })?;
        labels.push(schema.map(&record[label_idx], row_no)?);
        let mut parsed = Vec::with_capacity(header.len());
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                parsed.push(None);
                continue;
            }
            match parse_cell(cell) {
                Some(v) => parsed.push(v),
                None => {
                    numeric[j] = false;
                    parsed.push(None);
                }
            }
        }
        cells.push(parsed);
    }
    if cells.is_empty() {
        return Err(DataError::Empty);
    }

    let mut keep = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == label_idx {
            continue;
        }
        if numeric[j] {
            keep.push(j);
        } else if !schema.drop_non_numeric {
            return Err(DataError::NonNumericColumn(name.clone()));
        } else {
            log::debug!("dropping non-numeric column `{name}`");
        }
    }
    if keep.is_empty() {
        return Err(DataError::NoFeatures);
    }
    let feature_names = keep.iter().map(|&j| header[j].clone()).collect();
    let rows = cells
        .into_iter()
        .map(|r| keep.iter().map(|&j| r[j].unwrap_or(f64::NAN)).collect())
        .collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    RawTable::new(name, feature_names, rows, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Validation,
    Test,
    Other,
}

/// Standardized n×d matrix plus provenance.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    pub values: DMatrix<f64>,
    pub name: String,
    pub role: SplitRole,
    pub feature_names: Vec<String>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>, name: impl Into<String>, role: SplitRole) -> Self {
        let feature_names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        DataMatrix {
            values,
            name: name.into(),
            role,
            feature_names,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], name: impl Into<String>, role: SplitRole) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let values = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        DataMatrix::new(values, name, role)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Row-major copy, convenient for per-sample scoring.
    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        (0..self.nrows()).map(|i| self.row(i)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub matrix: DataMatrix,
    pub labels: Vec<Label>,
}

impl LabeledMatrix {
    /// Rows labelled normal, in order.
    pub fn normal_rows(&self) -> Vec<Vec<f64>> {
        (0..self.matrix.nrows())
            .filter(|&i| self.labels[i] == Label::Normal)
            .map(|i| self.matrix.row(i))
            .collect()
    }
}

/// Counts of (normal, attack) labels.
pub fn class_counts(labels: &[Label]) -> Result<(usize, usize), DataError> {
    if labels.is_empty() {
        return Err(DataError::NoLabels);
    }
    let attacks = labels.iter().filter(|l| l.is_attack()).count();
    Ok((labels.len() - attacks, attacks))
}

/// Per-feature standardization: `(x - mean) / std` with population std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self, DataError> {
        let n = x.nrows() as f64;
        if x.nrows() == 0 {
            return Err(DataError::Empty);
        }
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            if s < STD_FLOOR {
                return Err(DataError::AllConstant);
            }
            mean.push(m);
            std.push(s);
        }
        Ok(Scaler { mean, std })
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, DataError> {
        if x.ncols() != self.mean.len() {
            return Err(DataError::DimensionMismatch {
                expected: self.mean.len(),
                got: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.mean[j]) / self.std[j]
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Systematic,
    Random,
}

/// Requested split sizes and sampling options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub validation_normal: usize,
    pub validation_attack: usize,
    /// `None` takes every remaining normal row.
    #[serde(default)]
    pub test_normal: Option<usize>,
    /// `None` takes every remaining attack row.
    #[serde(default)]
    pub test_attack: Option<usize>,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingMode,
    #[serde(default = "default_trim")]
    pub trim_fraction: f64,
    /// Number of quantiles for the optional uniform quantile transform.
    #[serde(default)]
    pub quantiles: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_sampling() -> SamplingMode {
    SamplingMode::Systematic
}

fn default_trim() -> f64 {
    0.01
}

impl SplitSpec {
    pub fn new(train: usize, validation: (usize, usize), test: (usize, usize)) -> Self {
        SplitSpec {
            train,
            validation_normal: validation.0,
            validation_attack: validation.1,
            test_normal: Some(test.0),
            test_attack: Some(test.1),
            sampling: SamplingMode::Systematic,
            trim_fraction: default_trim(),
            quantiles: None,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.train < 2 {
            return Err(DataError::InvalidSpec("train size must be at least 2".into()));
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(DataError::InvalidSpec(format!(
                "trimming fraction {} outside [0, 0.5)",
                self.trim_fraction
            )));
        }
        if matches!(self.quantiles, Some(q) if q < 2) {
            return Err(DataError::InvalidSpec("quantile transform needs at least 2 quantiles".into()));
        }
        Ok(())
    }
}

/// Indices `0, s, 2s, …` with stride `s = ⌊pool_len / n⌋`, `n` of them.
pub fn systematic_indices(pool_len: usize, n: usize) -> Vec<usize> {
    if n == 0 || pool_len == 0 {
        return Vec::new();
    }
    let stride = (pool_len / n).max(1);
    (0..n.min(pool_len)).map(|i| i * stride).collect()
}

/// Reproducibility sidecar written next to every run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: String,
    pub train_count: usize,
    pub validation_counts: (usize, usize),
    pub test_counts: (usize, usize),
    pub trimmed_rows: usize,
    pub dropped_incomplete_rows: usize,
    pub removed_features: Vec<String>,
    pub kept_features: Vec<String>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub scaler: Scaler,
    pub quantiles: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub train: DataMatrix,
    pub validation: LabeledMatrix,
    pub test: LabeledMatrix,
    pub scaler: Scaler,
    pub quantile: Option<QuantileTransform>,
    pub manifest: SplitManifest,
}

/// Rows of `pool` surviving a two-sided per-feature percentile trim.
fn trim_pool(table: &RawTable, pool: &[usize], fraction: f64) -> Vec<usize> {
    if fraction <= 0.0 || pool.is_empty() {
        return pool.to_vec();
    }
    let bounds: Vec<(f64, f64)> = (0..table.n_features())
        .map(|j| {
            let mut vals: Vec<f64> = pool.iter().map(|&i| table.rows[i][j]).collect();
            vals.sort_by(f64::total_cmp);
            (
                quantile_sorted(&vals, fraction),
                quantile_sorted(&vals, 1.0 - fraction),
            )
        })
        .collect();
    pool.iter()
        .copied()
        .filter(|&i| {
            table.rows[i]
                .iter()
                .zip(&bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
        })
        .collect()
}

fn gather(table: &RawTable, idx: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), cols.len(), |i, j| table.rows[idx[i]][cols[j]])
}

fn take(pool: &[usize], from: usize, n: usize, what: &str) -> Result<Vec<usize>, DataError> {
    if from + n > pool.len() {
        return Err(DataError::InfeasibleSplit(format!(
            "requested {n} {what} rows but only {} available",
            pool.len().saturating_sub(from)
        )));
    }
    Ok(pool[from..from + n].to_vec())
}

/// Builds train/validation/test splits.
///
/// Order of operations: incomplete rows are dropped, the normal pool is
/// trimmed and the training set is sampled from it; validation and test
/// rows come from the remaining normals (all of them, not only the
/// trimmed pool) and from the attack rows, both shuffled with the spec
/// seed. Constant features are then removed, the optional quantile
/// transform and the scaler are fitted on the training rows only and
/// applied to every split.
pub fn preprocess(table: &RawTable, spec: &SplitSpec) -> Result<Preprocessed, DataError> {
    spec.validate()?;
    let complete: Vec<usize> = (0..table.n_rows())
        .filter(|&i| table.rows[i].iter().all(|v| v.is_finite()))
        .collect();
    let dropped_incomplete_rows = table.n_rows() - complete.len();
    let normals: Vec<usize> = complete
        .iter()
        .copied()
        .filter(|&i| table.labels[i] == Label::Normal)
        .collect();
    let mut attacks: Vec<usize> = complete
        .iter()
        .copied()
        .filter(|&i| table.labels[i] == Label::Attack)
        .collect();

    let pool = trim_pool(table, &normals, spec.trim_fraction);
    let trimmed_rows = normals.len() - pool.len();
    if spec.train > pool.len() {
        return Err(DataError::InfeasibleSplit(format!(
            "train size {} exceeds {} normal rows left after trimming",
            spec.train,
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let train_idx: Vec<usize> = match spec.sampling {
        SamplingMode::Systematic => systematic_indices(pool.len(), spec.train)
            .into_iter()
            .map(|i| pool[i])
            .collect(),
        SamplingMode::Random => {
            let mut picked: Vec<usize> = pool
                .choose_multiple(&mut rng, spec.train)
                .copied()
                .collect();
            picked.sort_unstable();
            picked
        }
    };
    let in_train: HashSet<usize> = train_idx.iter().copied().collect();
    let mut rest: Vec<usize> = normals
        .iter()
        .copied()
        .filter(|i| !in_train.contains(i))
        .collect();
    rest.shuffle(&mut rng);
    attacks.shuffle(&mut rng);

    let val_n = take(&rest, 0, spec.validation_normal, "validation normal")?;
    let test_n_count = spec
        .test_normal
        .unwrap_or(rest.len().saturating_sub(spec.validation_normal));
    let test_n = take(&rest, spec.validation_normal, test_n_count, "test normal")?;
    let val_a = take(&attacks, 0, spec.validation_attack, "validation attack")?;
    let test_a_count = spec
        .test_attack
        .unwrap_or(attacks.len().saturating_sub(spec.validation_attack));
    let test_a = take(&attacks, spec.validation_attack, test_a_count, "test attack")?;

    let mut val_idx: Vec<usize> = val_n.iter().chain(&val_a).copied().collect();
    val_idx.sort_unstable();
    let mut test_idx: Vec<usize> = test_n.iter().chain(&test_a).copied().collect();
    test_idx.sort_unstable();

    // constant-feature removal on the training rows
    let all_cols: Vec<usize> = (0..table.n_features()).collect();
    let raw_train = gather(table, &train_idx, &all_cols);
    let mut kept: Vec<usize> = all_cols
        .iter()
        .copied()
        .filter(|&j| column_std(raw_train.column(j).as_slice()) >= STD_FLOOR)
        .collect();
    if kept.is_empty() {
        return Err(DataError::AllConstant);
    }

    let mut train_x = gather(table, &train_idx, &kept);
    let mut val_x = gather(table, &val_idx, &kept);
    let mut test_x = gather(table, &test_idx, &kept);

    let quantile = match spec.quantiles {
        Some(q) => {
            let qt = QuantileTransform::fit(&train_x, q);
            train_x = qt.transform(&train_x)?;
            val_x = qt.transform(&val_x)?;
            test_x = qt.transform(&test_x)?;
            // a transform can flatten a nearly-constant column
            let still: Vec<usize> = (0..train_x.ncols())
                .filter(|&j| column_std(train_x.column(j).as_slice()) >= STD_FLOOR)
                .collect();
            if still.is_empty() {
                return Err(DataError::AllConstant);
            }
            if still.len() < train_x.ncols() {
                train_x = train_x.select_columns(&still);
                val_x = val_x.select_columns(&still);
                test_x = test_x.select_columns(&still);
                kept = still.iter().map(|&j| kept[j]).collect();
            }
            Some(qt)
        }
        None => None,
    };

    let scaler = Scaler::fit(&train_x)?;
    let train_x = scaler.transform(&train_x)?;
    let val_x = scaler.transform(&val_x)?;
    let test_x = scaler.transform(&test_x)?;

    let kept_names: Vec<String> = kept.iter().map(|&j| table.feature_names[j].clone()).collect();
    let kept_set: HashSet<usize> = kept.iter().copied().collect();
    let removed_features = (0..table.n_features())
        .filter(|j| !kept_set.contains(j))
        .map(|j| table.feature_names[j].clone())
        .collect();

    let mk = |values: DMatrix<f64>, role| DataMatrix {
        values,
        name: table.name.clone(),
        role,
        feature_names: kept_names.clone(),
    };
    let labels_of = |idx: &[usize]| idx.iter().map(|&i| table.labels[i]).collect::<Vec<_>>();

    let manifest = SplitManifest {
        dataset: table.name.clone(),
        train_count: train_idx.len(),
        validation_counts: (val_n.len(), val_a.len()),
        test_counts: (test_n.len(), test_a.len()),
        trimmed_rows,
        dropped_incomplete_rows,
        removed_features,
        kept_features: kept_names.clone(),
        train_indices: train_idx,
        validation_indices: val_idx.clone(),
        test_indices: test_idx.clone(),
        scaler: scaler.clone(),
        quantiles: spec.quantiles,
    };

    Ok(Preprocessed {
        train: mk(train_x, SplitRole::Train),
        validation: LabeledMatrix {
            matrix: mk(val_x, SplitRole::Validation),
            labels: labels_of(&val_idx),
        },
        test: LabeledMatrix {
            matrix: mk(test_x, SplitRole::Test),
            labels: labels_of(&test_idx),
        },
        scaler,
        quantile,
        manifest,
    })
}

impl SplitManifest {
    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }
}
