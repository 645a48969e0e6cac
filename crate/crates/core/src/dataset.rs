//! CSV loading, min-max scaling and seeded train/test splitting.
//!
//! All randomness comes from [`seeded_rng`]: a ChaCha8 stream seeded through
//! `SeedableRng::seed_from_u64`. Shuffles are rand 0.8's `SliceRandom::shuffle`,
//! a Fisher–Yates pass running from the last index down to 1 that swaps
//! position `i` with `gen_range(0..=i)`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Generator behind every seeded operation in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Labeled feature matrix with its class dictionary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// n samples × d features.
    pub features: Array2<f64>,
    /// Dense class index per sample, in `0..class_names.len()`.
    pub labels: Vec<usize>,
    /// Original label strings, indexed by class.
    pub class_names: Vec<String>,
    pub d_original: usize,
}

impl Dataset {
    /// Builds a dataset and checks its invariants.
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let classes = class_names.len();
        let mut seen = vec![false; classes];
        for &label in &labels {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
            seen[label] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyClass(missing));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite feature value".into()));
        }
        let d_original = features.ncols();
        Ok(Self {
            name: name.into(),
            features,
            labels,
            class_names,
            d_original,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows selected by `indices`, in the given order.
    pub fn select_features(&self, indices: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), indices)
    }

    pub fn select_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// Maps class indices back to the original label strings.
    pub fn decode_labels(&self, labels: &[usize]) -> Vec<String> {
        labels
            .iter()
            .map(|&l| self.class_names[l].clone())
            .collect()
    }

    /// Re-encodes the labels against another class dictionary, so that a
    /// separately loaded test file shares the training file's indices.
    pub fn remap_to(&self, class_names: &[String]) -> Result<Dataset> {
        let lookup: HashMap<&str, usize> = class_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let name = &self.class_names[l];
                lookup
                    .get(name.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownLabel(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            name: self.name.clone(),
            features: self.features.clone(),
            labels,
            class_names: class_names.to_vec(),
            d_original: self.d_original,
        })
    }
}

/// Which column holds the class label. Serialized as `null` (last column),
/// a zero-based column index, or a header name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Option<RawLabelColumn>", into = "Option<RawLabelColumn>")]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawLabelColumn {
    Index(usize),
    Name(String),
}

impl From<Option<RawLabelColumn>> for LabelColumn {
    fn from(raw: Option<RawLabelColumn>) -> Self {
        match raw {
            None => LabelColumn::Last,
            Some(RawLabelColumn::Index(i)) => LabelColumn::Index(i),
            Some(RawLabelColumn::Name(n)) => LabelColumn::Name(n),
        }
    }
}

impl From<LabelColumn> for Option<RawLabelColumn> {
    fn from(col: LabelColumn) -> Self {
        match col {
            LabelColumn::Last => None,
            LabelColumn::Index(i) => Some(RawLabelColumn::Index(i)),
            LabelColumn::Name(n) => Some(RawLabelColumn::Name(n)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Comma,
    Semicolon,
    Tab,
    /// Any run of spaces or tabs, as in several raw UCI `.data` files.
    Whitespace,
}

/// Column description for [`load_csv`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    #[serde(default)]
    pub label_column: LabelColumn,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub delimiter: Delimiter,
}

/// Loads a dataset from a delimited text file.
///
/// Labels are encoded to dense indices in order of first appearance. Rows
/// with missing cells (empty or `?`) are rejected, never imputed.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_csv_reader(BufReader::new(file), schema, name)
}

/// Same as [`load_csv`] for an arbitrary reader.
pub fn load_csv_reader<R: Read>(
    reader: R,
    schema: &CsvSchema,
    name: impl Into<String>,
) -> Result<Dataset> {
    let rows = read_rows(reader, schema.delimiter)?;
    let mut rows = rows
        .into_iter()
        .filter(|(_, cells)| !(cells.is_empty() || cells.len() == 1 && cells[0].trim().is_empty()));

    let header = if schema.has_header {
        rows.next().map(|(_, cells)| cells)
    } else {
        None
    };

    let mut width = None;
    let mut label_idx = None;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();

    for (line, cells) in rows {
        let w = *width.get_or_insert(cells.len());
        if cells.len() != w {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {w} fields, found {}", cells.len()),
            });
        }
        if w < 2 {
            return Err(Error::MalformedRow {
                line,
                reason: "need at least one feature and a label".into(),
            });
        }
        let li = match label_idx {
            Some(li) => li,
            None => {
                let li = resolve_label_column(&schema.label_column, header.as_deref(), w)?;
                label_idx = Some(li);
                li
            }
        };
        for (column, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() || cell == "?" {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("missing value in column {}", column + 1),
                });
            }
            if column == li {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericFeature {
                line,
                column: column + 1,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericFeature {
                    line,
                    column: column + 1,
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
    }

    if raw_labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = width.unwrap_or(1) - 1;
    let (labels, class_names) = encode_labels(&raw_labels);
    if class_names.len() < 2 {
        return Err(Error::SingleClassDataset);
    }
    let features =
        Array2::from_shape_vec((raw_labels.len(), d), values).expect("row widths validated above");
    Dataset::new(name, features, labels, class_names)
}

/// Dense label encoding in order of first appearance.
pub fn encode_labels<S: AsRef<str>>(raw: &[S]) -> (Vec<usize>, Vec<String>) {
    let mut lookup: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let labels = raw
        .iter()
        .map(|s| {
            let s = s.as_ref();
            *lookup.entry(s).or_insert_with(|| {
                names.push(s.to_string());
                names.len() - 1
            })
        })
        .collect();
    (labels, names)
}

fn read_rows<R: Read>(reader: R, delimiter: Delimiter) -> Result<Vec<(usize, Vec<String>)>> {
    let byte = match delimiter {
        Delimiter::Comma => b',',
        Delimiter::Semicolon => b';',
        Delimiter::Tab => b'\t',
        Delimiter::Whitespace => {
            let mut rows = Vec::new();
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line = line?;
                rows.push((i + 1, line.split_whitespace().map(String::from).collect()));
            }
            return Ok(rows);
        }
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(byte)
        .from_reader(reader);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, record.iter().map(String::from).collect()));
    }
    Ok(rows)
}

fn resolve_label_column(
    col: &LabelColumn,
    header: Option<&[String]>,
    width: usize,
) -> Result<usize> {
    match col {
        LabelColumn::Last => Ok(width - 1),
        LabelColumn::Index(i) if *i < width => Ok(*i),
        LabelColumn::Index(i) => Err(Error::UnknownLabelColumn(i.to_string())),
        LabelColumn::Name(name) => header
            .and_then(|h| h.iter().position(|c| c.trim() == name))
            .ok_or_else(|| Error::UnknownLabelColumn(name.clone())),
    }
}

/// Per-feature min-max parameters fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    /// `max - min`; zero marks a constant feature.
    pub range: Vec<f64>,
}

pub fn fit_scaler(train_features: ArrayView2<'_, f64>) -> Result<ScalerParams> {
    if train_features.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut min = Vec::with_capacity(train_features.ncols());
    let mut range = Vec::with_capacity(train_features.ncols());
    for col in train_features.columns() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        min.push(lo);
        range.push(hi - lo);
    }
    Ok(ScalerParams { min, range })
}

/// Maps each value to `(x - min) / range`, clamped to `[0, 1]`.
/// Constant features map to 0.5.
pub fn apply_scaler(params: &ScalerParams, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_dim(params.min.len(), features.ncols())?;
    let mut out = features.to_owned();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let (lo, range) = (params.min[j], params.range[j]);
        col.mapv_inplace(|x| {
            if range > 0.0 {
                ((x - lo) / range).clamp(0.0, 1.0)
            } else {
                0.5
            }
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            train_fraction: 0.9,
            seed,
            stratified: true,
        }
    }
}

/// Train/test index lists, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded holdout split.
///
/// Stratified: classes are visited in index order; each class's indices are
/// shuffled and the first `round(count * (1 - train_fraction))` go to the
/// test set, clamped to `[1, count - 1]`. Unstratified mode applies the same
/// rule to the whole index list.
pub fn stratified_split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let test_fraction = 1.0 - spec.train_fraction;
    let mut rng = seeded_rng(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();

    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut groups = vec![Vec::new(); dataset.n_classes()];
        for (i, &l) in dataset.labels.iter().enumerate() {
            groups[l].push(i);
        }
        if let Some(c) = groups.iter().position(|g| g.len() < 2) {
            return Err(Error::ClassTooSmall(c));
        }
        groups
    } else {
        if dataset.n_samples() < 2 {
            return Err(Error::DegenerateInput(
                "need at least 2 samples to split".into(),
            ));
        }
        vec![(0..dataset.n_samples()).collect()]
    };

    for mut group in groups {
        let count = group.len();
        let n_test = ((count as f64 * test_fraction).round() as usize).clamp(1, count - 1);
        group.shuffle(&mut rng);
        test.extend_from_slice(&group[..n_test]);
        train.extend_from_slice(&group[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
