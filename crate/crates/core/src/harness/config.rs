//! JSON run configuration (`schema_version` 1).
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "datasets": [
//!     {"name": "seeds", "path": "data/seeds.txt", "label_column": null,
//!      "header": false, "delimiter": "whitespace"}
//!   ],
//!   "reducers": ["autoencoder", "nca"],
//!   "classifiers": ["knn", "enn", "svm"],
//!   "repetitions": 10,
//!   "base_seed": 0,
//!   "train_fraction": 0.9,
//!   "stratified": true,
//!   "autoencoder": {"epochs": 500, "learning_rate": 0.05, "momentum": 0.9,
//!                   "batch_size": 16, "init_scale": 1.0},
//!   "nca": {"max_iters": 200, "initial_step": 1.0, "backtrack_factor": 0.5,
//!           "tolerance": 1e-6, "init": "scaled_identity", "init_noise": 0.001},
//!   "knn": {"k": 5},
//!   "enn": {"k": 5},
//!   "svm": {"c": 1.0, "tol": 0.001, "max_iter": 1000000, "kernel": "linear"},
//!   "output_dir": "results"
//! }
//! ```
//!
//! Relative dataset paths and `output_dir` resolve against the directory
//! holding the config file. Seed fields inside the `autoencoder` and `nca`
//! blocks, and `nca.p`, are overridden per repetition by the harness.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::AeTrainConfig;
use crate::classifiers::{ClassifierConfig, ClassifierKind, SvmParams};
use crate::dataset::{load_csv, CsvSchema, Dataset, Delimiter, LabelColumn};
use crate::error::{Error, Result};
use crate::nca::NcaConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducerKind {
    /// Scaled features passed through unchanged.
    None,
    Autoencoder,
    Nca,
}

impl ReducerKind {
    pub fn name(self) -> &'static str {
        match self {
            ReducerKind::None => "none",
            ReducerKind::Autoencoder => "autoencoder",
            ReducerKind::Nca => "nca",
        }
    }
}

impl std::str::FromStr for ReducerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ReducerKind::None),
            "autoencoder" => Ok(ReducerKind::Autoencoder),
            "nca" => Ok(ReducerKind::Nca),
            other => Err(Error::InvalidConfig(format!("unknown reducer {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub label_column: LabelColumn,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub delimiter: Delimiter,
}

impl DatasetEntry {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            label_column: self.label_column.clone(),
            has_header: self.header,
            delimiter: self.delimiter,
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        if self.path.as_os_str().is_empty() {
            return Err(Error::InvalidConfig(format!(
                "dataset {:?} has no path; download it and fill in \"path\"",
                self.name
            )));
        }
        let mut ds = load_csv(&self.path, &self.schema()).map_err(|e| {
            e.context(format!(
                "dataset={} path={}",
                self.name,
                self.path.display()
            ))
        })?;
        ds.name = self.name.clone();
        Ok(ds)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborBlock {
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub datasets: Vec<DatasetEntry>,
    #[serde(default = "default_reducers")]
    pub reducers: Vec<ReducerKind>,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_true")]
    pub stratified: bool,
    #[serde(default)]
    pub autoencoder: AeTrainConfig,
    #[serde(default)]
    pub nca: NcaConfig,
    #[serde(default = "default_neighbors")]
    pub knn: NeighborBlock,
    #[serde(default = "default_neighbors")]
    pub enn: NeighborBlock,
    #[serde(default)]
    pub svm: SvmParams,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_reducers() -> Vec<ReducerKind> {
    vec![ReducerKind::Autoencoder, ReducerKind::Nca]
}

fn default_classifiers() -> Vec<ClassifierKind> {
    ClassifierKind::ALL.to_vec()
}

fn default_repetitions() -> usize {
    10
}

fn default_train_fraction() -> f64 {
    0.9
}

fn default_true() -> bool {
    true
}

fn default_neighbors() -> NeighborBlock {
    NeighborBlock { k: default_k() }
}

impl RunConfig {
    /// Defaults for every field, with no datasets.
    pub fn for_testing() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            datasets: Vec::new(),
            reducers: vec![
                ReducerKind::None,
                ReducerKind::Autoencoder,
                ReducerKind::Nca,
            ],
            classifiers: default_classifiers(),
            repetitions: default_repetitions(),
            base_seed: 0,
            train_fraction: default_train_fraction(),
            stratified: true,
            autoencoder: AeTrainConfig::default(),
            nca: NcaConfig::default(),
            knn: default_neighbors(),
            enn: default_neighbors(),
            svm: SvmParams::default(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config JSON: {e}")))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for entry in &mut config.datasets {
            if !entry.path.as_os_str().is_empty() && entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
        }
        if let Some(out) = &config.output_dir {
            if out.is_relative() {
                config.output_dir = Some(base.join(out));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.reducers.is_empty() {
            return fail("at least one reducer is required");
        }
        if self.classifiers.is_empty() {
            return fail("at least one classifier is required");
        }
        if self.repetitions == 0 {
            return fail("repetitions must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail("train_fraction must be in (0, 1)");
        }
        if self.knn.k == 0 || self.enn.k == 0 {
            return fail("k must be positive");
        }
        self.autoencoder.validate()?;
        self.nca.validate()?;
        self.svm.validate()
    }

    /// Loads every dataset, failing on the first unreadable one.
    pub fn load_datasets(&self) -> Result<Vec<Dataset>> {
        if self.datasets.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one dataset is required".into(),
            ));
        }
        self.datasets.iter().map(DatasetEntry::load).collect()
    }

    pub fn repetition_seed(&self, repetition: usize) -> u64 {
        self.base_seed.wrapping_add(repetition as u64)
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            knn_k: self.knn.k,
            enn_k: self.enn.k,
            svm: self.svm.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let config = RunConfig::from_json(
            r#"{"schema_version": 1, "datasets": [{"name": "x", "path": "x.csv"}]}"#,
        )
        .unwrap();
        assert_eq!(
            config.reducers,
            vec![ReducerKind::Autoencoder, ReducerKind::Nca]
        );
        assert_eq!(config.classifiers.len(), 3);
        assert_eq!(config.repetitions, 10);
        assert_eq!(config.knn.k, 5);
        assert_eq!(config.svm.c, 1.0);
        assert_eq!(config.datasets[0].label_column, LabelColumn::Last);
        config.validate().unwrap();
    }

    #[test]
    fn rejects_wrong_schema_and_unknown_fields() {
        assert!(RunConfig::from_json(r#"{"schema_version": 2, "datasets": []}"#).is_err());
        assert!(
            RunConfig::from_json(r#"{"schema_version": 1, "datasets": [], "bogus": 1}"#).is_err()
        );
    }

    #[test]
    fn label_column_forms() {
        let config = RunConfig::from_json(
            r#"{"schema_version": 1, "datasets": [
                {"name": "a", "path": "a", "label_column": 0},
                {"name": "b", "path": "b", "label_column": "class", "header": true}
            ]}"#,
        )
        .unwrap();
        assert_eq!(config.datasets[0].label_column, LabelColumn::Index(0));
        assert_eq!(
            config.datasets[1].label_column,
            LabelColumn::Name("class".into())
        );
    }

    #[test]
    fn blank_path_is_reported() {
        let entry = DatasetEntry {
            name: "cnae9".into(),
            path: PathBuf::new(),
            label_column: LabelColumn::Last,
            header: false,
            delimiter: Delimiter::Comma,
        };
        assert!(matches!(entry.load(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut config = RunConfig::for_testing();
        config.classifiers.clear();
        assert!(config.validate().is_err());
        let mut config = RunConfig::for_testing();
        config.train_fraction = 1.0;
        assert!(config.validate().is_err());
    }
}
