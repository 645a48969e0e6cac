//! Dimensionality reduction (deep autoencoder, Neighborhood Components
//! Analysis) and classification (KNN, ENN, soft-margin SVM) from scratch,
//! with a benchmark harness that reduces each dataset to half its width and
//! scores every reducer × classifier pair on seeded 90:10 splits.

pub mod autoencoder;
pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nca;

pub use error::{Error, Result};
