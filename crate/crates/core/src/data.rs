//! Datasets: loading, z-score normalization, splitting and synthetic data.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TskError};
use crate::rng::rng_from_seed;

/// Labelled feature matrix.
///
/// Labels are class indices in `0..num_classes`. When the dataset was loaded
/// from a file, `class_values` records the raw label value of each class
/// index (sorted ascending), so other files can be mapped onto the same
/// classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    feature_names: Option<Vec<String>>,
    class_values: Option<Vec<i64>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.ncols() == 0 {
            return Err(TskError::Schema("dataset needs at least one feature".into()));
        }
        if num_classes == 0 {
            return Err(TskError::Schema("dataset needs at least one class".into()));
        }
        if labels.len() != features.nrows() {
            return Err(TskError::shape(
                format!("{} labels", features.nrows()),
                format!("{} labels", labels.len()),
            ));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(TskError::Schema(format!(
                "label {y} of sample {i} is not below num_classes={num_classes}"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            feature_names: None,
            class_values: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(TskError::shape(
                format!("{} feature names", self.dim()),
                format!("{} feature names", names.len()),
            ));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_class_values(mut self, values: Vec<i64>) -> Result<Self> {
        if values.len() != self.num_classes {
            return Err(TskError::shape(
                format!("{} class values", self.num_classes),
                format!("{} class values", values.len()),
            ));
        }
        self.class_values = Some(values);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn class_values(&self) -> Option<&[i64]> {
        self.class_values.as_deref()
    }

    /// Rows at `indices`, in that order. Class count and metadata are kept.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            feature_names: self.feature_names.clone(),
            class_values: self.class_values.clone(),
        }
    }

    /// Same rows with features replaced (used by normalization).
    fn with_features(&self, features: Array2<f64>) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }

    /// Re-indexes labels against another dataset's raw class values.
    ///
    /// Needed when a file is loaded separately from the data a model was
    /// trained on: both files remap their own labels, so indices only agree
    /// after going back through the raw values.
    pub fn align_classes(&self, classes: &[i64]) -> Result<Dataset> {
        let own = self.class_values.as_ref().ok_or_else(|| {
            TskError::Schema("dataset carries no raw class values to align".into())
        })?;
        let mut labels = Vec::with_capacity(self.labels.len());
        for &y in &self.labels {
            let raw = own[y];
            let idx = classes.iter().position(|&c| c == raw).ok_or_else(|| {
                TskError::Schema(format!("label {raw} is not one of the model classes {classes:?}"))
            })?;
            labels.push(idx);
        }
        Ok(Dataset {
            features: self.features.clone(),
            labels,
            num_classes: classes.len(),
            feature_names: self.feature_names.clone(),
            class_values: Some(classes.to_vec()),
        })
    }
}

/// Remaps raw labels to `0..C` by sorted order of the distinct values.
fn remap_labels(raw: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let classes: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let labels = raw
        .iter()
        .map(|v| classes.binary_search(v).expect("value comes from the same set"))
        .collect();
    (labels, classes)
}

fn parse_label(field: &str, line: usize) -> Result<i64> {
    let s = field.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(TskError::Schema(format!(
            "line {line}: label {s:?} is not an integer"
        ))),
    }
}

fn parse_value(field: &str, line: usize, column: usize) -> Result<f64> {
    let s = field.trim();
    s.parse::<f64>().map_err(|_| TskError::Parse {
        line,
        msg: format!("column {column}: {s:?} is not a number"),
    })
}

/// Layout of a dense CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenseFormat {
    CsvWithHeader,
    CsvNoHeader,
}

/// Which column of a dense file holds the integer labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Named(String),
}

pub fn load_dense(path: &Path, format: DenseFormat, label: &LabelColumn) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| TskError::io(path, e))?;
    read_dense(file, format, label)
}

/// Reads a comma-separated dense dataset.
pub fn read_dense<R: Read>(reader: R, format: DenseFormat, label: &LabelColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut values: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut label_idx = 0usize;

    for record in rdr.records() {
        let record = record.map_err(|e| TskError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if format == DenseFormat::CsvWithHeader && header.is_none() {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let n = record.len();
        match width {
            None => {
                if n < 2 {
                    return Err(TskError::Parse {
                        line,
                        msg: "need at least one feature column and a label column".into(),
                    });
                }
                if let Some(h) = &header {
                    if h.len() != n {
                        return Err(TskError::Parse {
                            line,
                            msg: format!("{n} fields but the header has {}", h.len()),
                        });
                    }
                }
                label_idx = match label {
                    LabelColumn::Last => n - 1,
                    LabelColumn::Index(i) if *i < n => *i,
                    LabelColumn::Index(i) => {
                        return Err(TskError::Schema(format!(
                            "label column {i} out of range for {n} columns"
                        )))
                    }
                    LabelColumn::Named(name) => header
                        .as_ref()
                        .and_then(|h| h.iter().position(|c| c == name))
                        .ok_or_else(|| {
                            TskError::Schema(format!("no column named {name:?} in the header"))
                        })?,
                };
                width = Some(n);
            }
            Some(w) if w != n => {
                return Err(TskError::Parse {
                    line,
                    msg: format!("expected {w} fields, found {n}"),
                });
            }
            Some(_) => {}
        }
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                raw_labels.push(parse_label(field, line)?);
            } else {
                values.push(parse_value(field, line, col)?);
            }
        }
    }

    let width = width.ok_or_else(|| TskError::Parse {
        line: 0,
        msg: "no data rows".into(),
    })?;
    let n = raw_labels.len();
    let features = Array2::from_shape_vec((n, width - 1), values)
        .expect("row widths were checked while parsing");
    let (labels, classes) = remap_labels(&raw_labels);
    let c = classes.len();
    let mut ds = Dataset::new(features, labels, c)?.with_class_values(classes)?;
    if let Some(mut h) = header {
        h.remove(label_idx);
        ds = ds.with_feature_names(h)?;
    }
    Ok(ds)
}

/// Writes a dataset as CSV with a header row and the raw label in the last column.
pub fn write_dense_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let csv_err = |e: csv::Error| TskError::Schema(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match ds.feature_names() {
        Some(names) => names.to_vec(),
        None => (0..ds.dim()).map(|j| format!("x{j}")).collect(),
    };
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(ds.dim() + 1);
    for (row, &y) in ds.features().rows().into_iter().zip(ds.labels()) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        let raw = ds.class_values().map_or(y as i64, |c| c[y]);
        record.push(raw.to_string());
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| TskError::Schema(format!("writing CSV: {e}")))?;
    Ok(())
}

pub fn load_sparse_index_value(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| TskError::io(path, e))?;
    read_sparse_index_value(BufReader::new(file))
}

/// Reads "label idx:val idx:val ..." lines with 1-based ascending indices.
///
/// The dimensionality is the largest index seen anywhere in the file;
/// unspecified entries are zero.
pub fn read_sparse_index_value<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim = 0usize;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| TskError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = tokens.next().expect("line is not blank");
        raw_labels.push(parse_label(label, lineno)?);

        let mut entries = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| TskError::Parse {
                line: lineno,
                msg: format!("{tok:?} is not idx:value"),
            })?;
            let idx: usize = idx.parse().map_err(|_| TskError::Parse {
                line: lineno,
                msg: format!("{idx:?} is not a positive index"),
            })?;
            if idx == 0 {
                return Err(TskError::Parse {
                    line: lineno,
                    msg: "indices are 1-based".into(),
                });
            }
            if idx <= prev {
                return Err(TskError::Parse {
                    line: lineno,
                    msg: format!("index {idx} after {prev}: indices must be strictly ascending"),
                });
            }
            let val: f64 = val.parse().map_err(|_| TskError::Parse {
                line: lineno,
                msg: format!("{val:?} is not a number"),
            })?;
            prev = idx;
            entries.push((idx, val));
        }
        dim = dim.max(prev);
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(TskError::Parse {
            line: 0,
            msg: "no data rows".into(),
        });
    }
    if dim == 0 {
        return Err(TskError::Schema("no feature indices in the file".into()));
    }
    let mut features = Array2::zeros((rows.len(), dim));
    for (r, entries) in rows.iter().enumerate() {
        for &(idx, val) in entries {
            features[[r, idx - 1]] = val;
        }
    }
    let (labels, classes) = remap_labels(&raw_labels);
    let c = classes.len();
    Dataset::new(features, labels, c)?.with_class_values(classes)
}

/// Per-column z-score statistics fitted on a training set.
///
/// Uses the population standard deviation. Columns whose deviation is zero
/// (to relative precision) are only mean-centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(TskError::Precondition(
                "cannot fit normalization on an empty dataset".into(),
            ));
        }
        let n = train.n_samples() as f64;
        let x = train.features();
        let mut mean = Vec::with_capacity(train.dim());
        let mut std = Vec::with_capacity(train.dim());
        for col in x.axis_iter(Axis(1)) {
            let mu = col.sum() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean.push(mu);
            std.push(if sd <= 1e-12 * mu.abs().max(1.0) { 0.0 } else { sd });
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_dim(&self, ds: &Dataset) -> Result<()> {
        if ds.dim() != self.dim() {
            return Err(TskError::shape(
                format!("{} features", self.dim()),
                format!("{} features", ds.dim()),
            ));
        }
        Ok(())
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        self.check_dim(ds)?;
        let mut x = ds.features().to_owned();
        for mut row in x.rows_mut() {
            for ((v, &mu), &sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if sd == 0.0 { *v - mu } else { (*v - mu) / sd };
            }
        }
        Ok(ds.with_features(x))
    }

    pub fn inverse_transform(&self, ds: &Dataset) -> Result<Dataset> {
        self.check_dim(ds)?;
        let mut x = ds.features().to_owned();
        for mut row in x.rows_mut() {
            for ((v, &mu), &sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if sd == 0.0 { *v + mu } else { *v * sd + mu };
            }
        }
        Ok(ds.with_features(x))
    }
}

/// Fits z-score statistics on `train` only and applies them to every set.
pub fn zscore_fit_transform(
    train: &Dataset,
    others: &[&Dataset],
) -> Result<(Dataset, Vec<Dataset>, NormStats)> {
    let stats = NormStats::fit(train)?;
    let train = stats.transform(train)?;
    let others = others
        .iter()
        .map(|ds| stats.transform(ds))
        .collect::<Result<Vec<_>>>()?;
    Ok((train, others, stats))
}

/// How to partition a dataset into train, validation and test sets.
///
/// The validation set is carved out of the training portion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction_of_train: f64,
    pub seed: u64,
    /// Permit an empty test set when `train_fraction` is 1.
    #[serde(default)]
    pub allow_empty_test: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            validation_fraction_of_train: 0.1,
            seed: 0,
            allow_empty_test: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

// Guards against products like 0.7 * 10 landing a hair below an integer.
const ROUNDING_SLACK: f64 = 1e-9;

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(TskError::Config(format!(
                "train_fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction_of_train) {
            return Err(TskError::Config(format!(
                "validation fraction must be in [0, 1), got {}",
                self.validation_fraction_of_train
            )));
        }
        Ok(())
    }

    /// Split sizes for `n` samples: train and validation counts are floored,
    /// the remainder goes to test.
    ///
    /// The training pool is `floor(n * train_fraction)`; within it the
    /// training count is `floor(pool * (1 - validation_fraction))` and the
    /// validation set takes the rest of the pool.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let pool = ((n as f64) * self.train_fraction + ROUNDING_SLACK).floor() as usize;
        let pool = pool.min(n);
        let train = ((pool as f64) * (1.0 - self.validation_fraction_of_train) + ROUNDING_SLACK)
            .floor() as usize;
        let val = pool - train;
        let test = n - pool;
        if train == 0 {
            return Err(TskError::Config(format!("{n} samples leave the training split empty")));
        }
        if self.validation_fraction_of_train > 0.0 && val == 0 {
            return Err(TskError::Config(format!(
                "{n} samples leave the requested validation split empty"
            )));
        }
        if test == 0 && !(self.train_fraction == 1.0 && self.allow_empty_test) {
            return Err(TskError::Config(format!(
                "{n} samples leave the test split empty (set allow_empty_test to permit this)"
            )));
        }
        Ok((train, val, test))
    }

    pub fn indices(&self, n: usize) -> Result<SplitIndices> {
        let (n_train, n_val, _) = self.sizes(n)?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_from_seed(self.seed));
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Ok(SplitIndices {
            train: idx,
            val,
            test,
        })
    }
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let idx = spec.indices(ds.n_samples())?;
    Ok(Split {
        train: ds.subset(&idx.train),
        val: ds.subset(&idx.val),
        test: ds.subset(&idx.test),
    })
}

/// Label assignment for synthetic Gaussian data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Labeling {
    /// Uniform random labels, independent of the features.
    Random,
    /// Class `c` has its mean shifted by `shift` on every feature of its
    /// block (see [`class_block`]).
    ClusterSeparable { shift: f64 },
}

/// Feature range shifted for class `class` out of `classes`: the features are
/// split into `classes` contiguous blocks `[c*d/C, (c+1)*d/C)`. When `d < C`
/// some blocks would be empty, and those classes use the single feature `c mod d`.
pub fn class_block(class: usize, classes: usize, d: usize) -> std::ops::Range<usize> {
    let start = class * d / classes;
    let end = (class + 1) * d / classes;
    if start < end {
        start..end
    } else {
        let j = class % d;
        j..j + 1
    }
}

/// Standard-normal features with random or class-shifted labels.
///
/// Each sample draws its label and then its `d` features from one stream,
/// so identical arguments produce bitwise-identical datasets.
pub fn synth_gaussian(n: usize, d: usize, c: usize, seed: u64, labeling: Labeling) -> Result<Dataset> {
    if n == 0 || d == 0 || c == 0 {
        return Err(TskError::Config(format!(
            "synthetic sizes must be positive (n={n}, d={d}, c={c})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for mut row in features.rows_mut() {
        let y = rng.random_range(0..c);
        for v in row.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        if let Labeling::ClusterSeparable { shift } = labeling {
            for j in class_block(y, c, d) {
                row[j] += shift;
            }
        }
        labels.push(y);
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(features, labels, c)?
        .with_class_values((0..c as i64).collect())?
        .with_feature_names(names)
}
