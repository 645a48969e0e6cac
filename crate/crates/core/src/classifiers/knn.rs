use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `sqrt(sum_t (c_t - c'_t)^2)`.
pub fn euclidean_distance(c: ArrayView1<'_, f64>, other: ArrayView1<'_, f64>) -> Result<f64> {
    check_dim(c.len(), other.len())?;
    Ok(distance(c, other))
}

pub(crate) fn distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The `k` rows of `points` closest to `query`, as `(index, distance)` pairs
/// ordered by distance then index. `skip` removes one row from consideration.
pub(crate) fn nearest(
    points: ArrayView2<'_, f64>,
    query: ArrayView1<'_, f64>,
    k: usize,
    skip: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, row)| (i, distance(row, query)))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < all.len() {
        all.select_nth_unstable_by(k, cmp);
        all.truncate(k);
    }
    all.sort_unstable_by(cmp);
    all
}

/// Index of the largest value; ties go to the lower index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn validate_training(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
) -> Result<()> {
    if features.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: labels.len(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange {
            label,
            classes: n_classes,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train_features: Array2<f64>,
    pub train_labels: Vec<usize>,
    pub n_classes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnPrediction {
    pub class: usize,
    /// Fraction of the k neighbors carrying each class.
    pub probabilities: Vec<f64>,
}

impl KnnModel {
    pub fn fit(
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        k: usize,
    ) -> Result<Self> {
        validate_training(features.view(), &labels, n_classes)?;
        if k == 0 || k > labels.len() {
            return Err(Error::KTooLarge { k, n: labels.len() });
        }
        Ok(Self {
            k,
            train_features: features,
            train_labels: labels,
            n_classes,
        })
    }

    /// Majority vote among the k nearest training points. Distance ties go
    /// to the lower training index, probability ties to the lower class.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<KnnPrediction> {
        check_dim(self.train_features.ncols(), x.len())?;
        let mut counts = vec![0usize; self.n_classes];
        for (i, _) in nearest(self.train_features.view(), x, self.k, None) {
            counts[self.train_labels[i]] += 1;
        }
        let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / self.k as f64).collect();
        Ok(KnnPrediction {
            class: argmax(&probabilities),
            probabilities,
        })
    }

    pub fn predict_class(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(self.predict(x)?.class)
    }
}
