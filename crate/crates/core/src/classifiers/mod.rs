//! KNN, ENN and soft-margin SVM classifiers over reduced feature vectors.

pub mod enn;
pub mod knn;
pub mod svm;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

pub use enn::{enn_class_statistic, EnnModel};
pub use knn::{euclidean_distance, KnnModel, KnnPrediction};
pub use svm::{svm_train_binary, Kernel, SvmBinaryModel, SvmMulticlassModel, SvmParams};

use crate::error::{Error, Result};

const FORMAT: &str = "reducebench-classifier";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Enn,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::Knn,
        ClassifierKind::Enn,
        ClassifierKind::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Enn => "enn",
            ClassifierKind::Svm => "svm",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ClassifierKind::Knn),
            "enn" => Ok(ClassifierKind::Enn),
            "svm" => Ok(ClassifierKind::Svm),
            other => Err(Error::InvalidConfig(format!(
                "unknown classifier {other:?}"
            ))),
        }
    }
}

/// Hyperparameters for all three classifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub knn_k: usize,
    pub enn_k: usize,
    pub svm: SvmParams,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            knn_k: 5,
            enn_k: 5,
            svm: SvmParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierModel {
    Knn(KnnModel),
    Enn(EnnModel),
    Svm(SvmMulticlassModel),
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    version: u32,
    model: ClassifierModel,
}

impl ClassifierModel {
    pub fn fit(
        kind: ClassifierKind,
        config: &ClassifierConfig,
        features: ArrayView2<'_, f64>,
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::Knn => ClassifierModel::Knn(KnnModel::fit(
                features.to_owned(),
                labels.to_vec(),
                n_classes,
                config.knn_k,
            )?),
            ClassifierKind::Enn => ClassifierModel::Enn(EnnModel::fit(
                features.to_owned(),
                labels.to_vec(),
                n_classes,
                config.enn_k,
            )?),
            ClassifierKind::Svm => ClassifierModel::Svm(SvmMulticlassModel::fit(
                features,
                labels,
                n_classes,
                &config.svm,
            )?),
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::Knn(_) => ClassifierKind::Knn,
            ClassifierModel::Enn(_) => ClassifierKind::Enn,
            ClassifierModel::Svm(_) => ClassifierKind::Svm,
        }
    }

    /// ENN predictions use the incremental rule.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        match self {
            ClassifierModel::Knn(m) => m.predict_class(x),
            ClassifierModel::Enn(m) => m.predict_incremental(x),
            ClassifierModel::Svm(m) => m.predict(x),
        }
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        x.rows().into_iter().map(|row| self.predict(row)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelRecord {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ModelRecord = serde_json::from_str(text)?;
        if record.format != FORMAT || record.version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(record.version));
        }
        Ok(record.model)
    }
}
