use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reducers, classifiers, metrics and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("non-numeric feature at line {line}, column {column}: {value:?}")]
    NonNumericFeature {
        line: usize,
        column: usize,
        value: String,
    },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("dataset contains a single class")]
    SingleClassDataset,

    #[error("label column {0:?} not found")]
    UnknownLabelColumn(String),

    #[error("label {0:?} is not part of the reference class list")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("class {0} has fewer than 2 samples and cannot be split")]
    ClassTooSmall(usize),

    #[error("class {0} has no samples")]
    EmptyClass(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid code dimension {code_dim} for input dimension {input_dim}")]
    InvalidCodeDim { code_dim: usize, input_dim: usize },

    #[error("invalid target dimension {target} for input dimension {input_dim}")]
    InvalidTargetDim { target: usize, input_dim: usize },

    #[error("loss became non-finite at epoch {epoch}; reduce the learning rate")]
    NonFiniteLoss { epoch: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("k = {k} is too large for {n} samples")]
    KTooLarge { k: usize, n: usize },

    #[error("model has no support vectors")]
    ModelUntrained,

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps the error with a human readable location, e.g. the harness cell.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Stable snake_case identifier used in machine-parseable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) => "file_not_found",
            Error::MalformedRow { .. } => "malformed_row",
            Error::NonNumericFeature { .. } => "non_numeric_feature",
            Error::EmptyDataset => "empty_dataset",
            Error::SingleClassDataset => "single_class_dataset",
            Error::UnknownLabelColumn(_) => "unknown_label_column",
            Error::UnknownLabel(_) => "unknown_label",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ClassTooSmall(_) => "class_too_small",
            Error::EmptyClass(_) => "empty_class",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::InvalidCodeDim { .. } => "invalid_code_dim",
            Error::InvalidTargetDim { .. } => "invalid_target_dim",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::SingleClass => "single_class",
            Error::KTooLarge { .. } => "k_too_large",
            Error::ModelUntrained => "model_untrained",
            Error::EmptyMatrix => "empty_matrix",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::Context { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
