//! Tabular feature datasets with binary labels.
//!
//! CSV layout: the first column holds sample IDs, one named column holds the
//! class label, every other column is a numeric feature. Empty cells and the
//! missing token (`nan` by default, case-insensitive) become `NaN`.
//! An optional two-column groups file maps feature names to group tags.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

/// Upper bound on distinct feature groups; one activator exists per group slot.
pub const MAX_GROUPS: usize = 17;

pub const DEFAULT_GROUP: &str = "default";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("label column '{0}' not found in header")]
    MissingLabelColumn(String),
    #[error("non-binary labels: expected exactly 2 distinct values, found {} ({})", .0.len(), .0.join(", "))]
    NonBinaryLabels(Vec<String>),
    #[error("positive class '{0}' does not occur in the label column")]
    UnknownPositiveClass(String),
    #[error("duplicate sample id '{id}' at line {line}")]
    DuplicateSampleId { id: String, line: u64 },
    #[error("duplicate feature name '{0}'")]
    DuplicateFeature(String),
    #[error("line {line}, column '{column}': cannot parse '{value}' as a number")]
    BadValue {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: missing label")]
    MissingLabel { line: u64 },
    #[error("groups file: {0}")]
    Groups(String),
    #[error("{0} distinct feature groups exceed the maximum of {MAX_GROUPS}")]
    TooManyGroups(usize),
    #[error("invalid dataset shape: {0}")]
    Shape(String),
    #[error("cannot stratify: class {class} has {count} sample(s), need at least 2")]
    CannotStratify { class: u8, count: usize },
    #[error("test fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
}

/// Samples × features matrix with binary labels and feature metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    sample_ids: Vec<String>,
    feature_names: Vec<String>,
    group_tags: Vec<String>,
    values: Matrix,
    labels: Vec<u8>,
    /// Original label strings for class 0 and class 1.
    class_labels: [String; 2],
}

impl FeatureDataset {
    pub fn new(
        sample_ids: Vec<String>,
        feature_names: Vec<String>,
        group_tags: Vec<String>,
        values: Matrix,
        labels: Vec<u8>,
        class_labels: [String; 2],
    ) -> Result<Self, DatasetError> {
        let d = Self {
            sample_ids,
            feature_names,
            group_tags,
            values,
            labels,
            class_labels,
        };
        d.validate()?;
        Ok(d)
    }

    /// Convenience constructor with generated IDs, names and a single group.
    pub fn from_matrix(values: Matrix, labels: Vec<u8>) -> Result<Self, DatasetError> {
        let n = values.nrows();
        let p = values.ncols();
        Self::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            (0..p).map(|j| format!("f{j}")).collect(),
            vec![DEFAULT_GROUP.to_string(); p],
            values,
            labels,
            ["0".to_string(), "1".to_string()],
        )
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let n = self.values.nrows();
        let p = self.values.ncols();
        if self.sample_ids.len() != n || self.labels.len() != n {
            return Err(DatasetError::Shape(format!(
                "{} rows, {} ids, {} labels",
                n,
                self.sample_ids.len(),
                self.labels.len()
            )));
        }
        if self.feature_names.len() != p || self.group_tags.len() != p {
            return Err(DatasetError::Shape(format!(
                "{} columns, {} names, {} group tags",
                p,
                self.feature_names.len(),
                self.group_tags.len()
            )));
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(DatasetError::Shape("labels must be 0 or 1".into()));
        }
        let counts = self.class_counts();
        if counts[0] == 0 || counts[1] == 0 {
            return Err(DatasetError::NonBinaryLabels(
                self.class_labels
                    .iter()
                    .zip(counts)
                    .filter(|(_, c)| *c > 0)
                    .map(|(s, _)| s.clone())
                    .collect(),
            ));
        }
        let mut seen = HashSet::new();
        for (i, id) in self.sample_ids.iter().enumerate() {
            if !seen.insert(id) {
                return Err(DatasetError::DuplicateSampleId {
                    id: id.clone(),
                    line: i as u64 + 2,
                });
            }
        }
        let mut seen = HashSet::new();
        for name in &self.feature_names {
            if !seen.insert(name) {
                return Err(DatasetError::DuplicateFeature(name.clone()));
            }
        }
        let groups: BTreeSet<&String> = self.group_tags.iter().collect();
        if groups.len() > MAX_GROUPS {
            return Err(DatasetError::TooManyGroups(groups.len()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn group_tags(&self) -> &[String] {
        &self.group_tags
    }

    pub fn class_labels(&self) -> &[String; 2] {
        &self.class_labels
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Distinct group tags in sorted order, and each feature's slot in that list.
    ///
    /// Group activator `i` of a workflow applies to the `i`-th distinct tag.
    pub fn group_slots(&self) -> (Vec<String>, Vec<usize>) {
        let distinct: Vec<String> = self
            .group_tags
            .iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .cloned()
            .collect();
        let pos: HashMap<&String, usize> =
            distinct.iter().enumerate().map(|(i, g)| (g, i)).collect();
        let slots = self.group_tags.iter().map(|g| pos[g]).collect();
        (distinct, slots)
    }

    /// Rows at `idx` as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Result<FeatureDataset, DatasetError> {
        Self::new(
            idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            self.feature_names.clone(),
            self.group_tags.clone(),
            self.values.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
            self.class_labels.clone(),
        )
    }

    /// Returns a copy with some values replaced; used by leakage tests.
    pub fn with_values(&self, values: Matrix) -> Result<FeatureDataset, DatasetError> {
        Self::new(
            self.sample_ids.clone(),
            self.feature_names.clone(),
            self.group_tags.clone(),
            values,
            self.labels.clone(),
            self.class_labels.clone(),
        )
    }

    /// Writes the dataset in the CSV layout [`load_csv`] reads.
    pub fn write_csv(&self, path: &Path, label_column: &str) -> Result<(), DatasetError> {
        let io_err = |source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(e, 0))?;
        let mut header = vec!["id".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.push(label_column.to_string());
        w.write_record(&header).map_err(|e| csv_err(e, 1))?;
        for i in 0..self.n_samples() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.sample_ids[i].clone());
            rec.extend(self.values.row(i).iter().map(|v| {
                if v.is_nan() {
                    String::new()
                } else {
                    format!("{v}")
                }
            }));
            rec.push(self.class_labels[self.labels[i] as usize].clone());
            w.write_record(&rec).map_err(|e| csv_err(e, i as u64 + 2))?;
        }
        w.flush().map_err(io_err)
    }

    /// Writes the (feature_name, group_tag) file.
    pub fn write_groups_csv(&self, path: &Path) -> Result<(), DatasetError> {
        let mut f = File::create(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut out = String::from("feature_name,group_tag\n");
        for (n, g) in self.feature_names.iter().zip(&self.group_tags) {
            out.push_str(&format!("{n},{g}\n"));
        }
        f.write_all(out.as_bytes()).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn csv_err(e: csv::Error, fallback_line: u64) -> DatasetError {
    let line = e
        .position()
        .map(|p| p.line())
        .unwrap_or(fallback_line);
    DatasetError::Csv {
        line,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: String,
    pub groups_path: Option<PathBuf>,
    /// Token treated as missing in addition to empty cells (case-insensitive).
    pub missing_token: String,
    /// Label value to map to class 1; otherwise the lexicographically larger value.
    pub positive_class: Option<String>,
}

impl LoadOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            groups_path: None,
            missing_token: "nan".to_string(),
            positive_class: None,
        }
    }
}

/// Loads a dataset from CSV. See the module docs for the layout.
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<FeatureDataset, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let header = reader.headers().map_err(|e| csv_err(e, 1))?.clone();
    if header.len() < 2 {
        return Err(DatasetError::Csv {
            line: 1,
            message: "need an ID column and a label column".into(),
        });
    }
    let label_idx = header
        .iter()
        .position(|h| h == opts.label_column)
        .filter(|&i| i > 0)
        .ok_or_else(|| DatasetError::MissingLabelColumn(opts.label_column.clone()))?;
    let feature_cols: Vec<usize> = (1..header.len()).filter(|&i| i != label_idx).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&i| header[i].to_string()).collect();

    let mut ids = Vec::new();
    let mut raw_labels = Vec::new();
    let mut data = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let line = r as u64 + 2;
        let rec = rec.map_err(|e| csv_err(e, line))?;
        ids.push(rec[0].to_string());
        let label = rec[label_idx].trim();
        if label.is_empty() {
            return Err(DatasetError::MissingLabel { line });
        }
        raw_labels.push(label.to_string());
        for &c in &feature_cols {
            let cell = rec[c].trim();
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case(&opts.missing_token)
                || cell.eq_ignore_ascii_case("nan")
            {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| DatasetError::BadValue {
                    line,
                    column: header[c].to_string(),
                    value: cell.to_string(),
                })?
            };
            data.push(v);
        }
    }

    let distinct: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if distinct.len() != 2 {
        return Err(DatasetError::NonBinaryLabels(distinct));
    }
    let class_labels = match &opts.positive_class {
        None => [distinct[0].clone(), distinct[1].clone()],
        Some(pos) if *pos == distinct[1] => [distinct[0].clone(), distinct[1].clone()],
        Some(pos) if *pos == distinct[0] => [distinct[1].clone(), distinct[0].clone()],
        Some(pos) => return Err(DatasetError::UnknownPositiveClass(pos.clone())),
    };
    let labels = raw_labels
        .iter()
        .map(|l| u8::from(*l == class_labels[1]))
        .collect();

    let group_tags = match &opts.groups_path {
        Some(gp) => read_groups(gp, &feature_names)?,
        None => vec![DEFAULT_GROUP.to_string(); feature_names.len()],
    };
    let values = Matrix::from_vec(ids.len(), feature_names.len(), data);
    FeatureDataset::new(ids, feature_names, group_tags, values, labels, class_labels)
}

fn read_groups(path: &Path, features: &[String]) -> Result<Vec<String>, DatasetError> {
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(file);
    let mut map: HashMap<String, String> = HashMap::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e, r as u64 + 1))?;
        if rec.len() != 2 {
            return Err(DatasetError::Groups(format!(
                "line {}: expected 2 columns, found {}",
                r + 1,
                rec.len()
            )));
        }
        let (name, tag) = (rec[0].trim(), rec[1].trim());
        if r == 0 && (name == "feature_name" || name == "feature") {
            continue;
        }
        if tag.is_empty() {
            return Err(DatasetError::Groups(format!("line {}: empty group tag", r + 1)));
        }
        map.insert(name.to_string(), tag.to_string());
    }
    let known: HashSet<&str> = features.iter().map(String::as_str).collect();
    if let Some(unknown) = map.keys().find(|k| !known.contains(k.as_str())) {
        return Err(DatasetError::Groups(format!("unknown feature '{unknown}'")));
    }
    features
        .iter()
        .map(|f| {
            map.get(f)
                .cloned()
                .ok_or_else(|| DatasetError::Groups(format!("no group for feature '{f}'")))
        })
        .collect()
}

/// Disjoint train/test partition of sample indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Number of test samples taken from a class of `count` samples.
///
/// Rounds half up, then clamps so both partitions keep at least one sample.
pub fn stratum_test_count(count: usize, test_fraction: f64) -> usize {
    let raw = (count as f64 * test_fraction + 0.5 + 1e-9).floor() as usize;
    raw.clamp(1, count - 1)
}

/// Stratified random split of a label vector.
pub fn stratified_split_labels(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..=1u8 {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < 2 {
            return Err(DatasetError::CannotStratify {
                class,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let k = stratum_test_count(idx.len(), test_fraction);
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        test_indices: test,
        seed,
    })
}

pub fn stratified_split(
    d: &FeatureDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, DatasetError> {
    stratified_split_labels(d.labels(), test_fraction, seed)
}
