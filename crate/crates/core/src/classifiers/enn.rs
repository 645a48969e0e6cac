//! Extended nearest neighbors.
//!
//! A query is assigned to the class that maximizes the intra-class coherence
//! of the training set augmented with the query. The coherence for a
//! hypothetical label `j` is `sum_i T_i^j`, where `T_i^j` is the fraction of
//! k-nearest-neighbor slots of class-`i` points (in the augmented set) held
//! by class-`i` points.
//!
//! Two decision rules are provided: [`EnnModel::predict_direct`] rebuilds
//! every statistic from the augmented set, while
//! [`EnnModel::predict_incremental`] only accounts for the neighbor
//! relations the query changes. Both produce identical counts and therefore
//! identical decisions.

use ndarray::{concatenate, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::knn::{argmax, distance, nearest, validate_training};
use crate::error::{check_dim, Error, Result};

/// Per class, how many of its members' k-NN slots hold same-class points.
fn same_class_counts(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    k: usize,
) -> Vec<usize> {
    let mut counts = vec![0usize; n_classes];
    for (i, row) in features.rows().into_iter().enumerate() {
        counts[labels[i]] += nearest(features, row, k, Some(i))
            .iter()
            .filter(|(j, _)| labels[*j] == labels[i])
            .count();
    }
    counts
}

fn statistic(count: usize, class_size: usize, k: usize) -> f64 {
    count as f64 / (class_size * k) as f64
}

fn coherence(counts: &[usize], class_sizes: &[usize], k: usize) -> f64 {
    counts
        .iter()
        .zip(class_sizes)
        .map(|(&c, &size)| statistic(c, size, k))
        .sum()
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        Err(Error::KTooLarge { k, n })
    } else {
        Ok(())
    }
}

/// `T_i`: the share of the k nearest neighbors (self excluded) of class-`i`
/// samples that also belong to class `i`. Neighbor ties go to the lower
/// sample index.
pub fn enn_class_statistic(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    k: usize,
    class: usize,
) -> Result<f64> {
    let n_classes = labels
        .iter()
        .copied()
        .max()
        .map_or(0, |m| m + 1)
        .max(class + 1);
    validate_training(features, labels, n_classes)?;
    check_k(k, labels.len())?;
    let size = labels.iter().filter(|&&l| l == class).count();
    if size == 0 {
        return Err(Error::EmptyClass(class));
    }
    let counts = same_class_counts(features, labels, n_classes, k);
    Ok(statistic(counts[class], size, k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnnModel {
    pub k: usize,
    pub train_features: Array2<f64>,
    pub train_labels: Vec<usize>,
    pub n_classes: usize,
    /// `n_i`, samples per class.
    pub class_counts: Vec<usize>,
    /// `T_i` of the training set alone.
    pub baseline_stats: Vec<f64>,
    /// Per class, same-class neighbor slots in the training set.
    same_class: Vec<usize>,
    /// Distance from each training point to its k-th neighbor.
    kth_distance: Vec<f64>,
    /// Label of each training point's k-th neighbor.
    kth_label: Vec<usize>,
}

impl EnnModel {
    pub fn fit(
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        k: usize,
    ) -> Result<Self> {
        validate_training(features.view(), &labels, n_classes)?;
        check_k(k, labels.len())?;
        let mut class_counts = vec![0usize; n_classes];
        for &l in &labels {
            class_counts[l] += 1;
        }
        if let Some(empty) = class_counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass(empty));
        }

        let mut same_class = vec![0usize; n_classes];
        let mut kth_distance = Vec::with_capacity(labels.len());
        let mut kth_label = Vec::with_capacity(labels.len());
        for (i, row) in features.rows().into_iter().enumerate() {
            let neighbors = nearest(features.view(), row, k, Some(i));
            same_class[labels[i]] += neighbors
                .iter()
                .filter(|(j, _)| labels[*j] == labels[i])
                .count();
            let &(last, dist) = neighbors.last().expect("k >= 1");
            kth_distance.push(dist);
            kth_label.push(labels[last]);
        }
        let baseline_stats = same_class
            .iter()
            .zip(&class_counts)
            .map(|(&c, &size)| statistic(c, size, k))
            .collect();

        Ok(Self {
            k,
            train_features: features,
            train_labels: labels,
            n_classes,
            class_counts,
            baseline_stats,
            same_class,
            kth_distance,
            kth_label,
        })
    }

    fn augmented_sizes(&self, j: usize) -> Vec<usize> {
        let mut sizes = self.class_counts.clone();
        sizes[j] += 1;
        sizes
    }

    /// Coherence `sum_i T_i^j` for every candidate class `j`, recomputed
    /// from scratch on the augmented set. The query takes index `n`, so it
    /// loses every distance tie against a training point.
    pub fn coherence_direct(&self, z: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_dim(self.train_features.ncols(), z.len())?;
        let augmented = concatenate![Axis(0), self.train_features.view(), z.insert_axis(Axis(0))];
        let n = augmented.nrows();
        let mut labels = self.train_labels.clone();
        labels.push(0);

        // Neighbor sets of the augmented points do not depend on the label
        // given to z, only the counting does.
        let neighbor_sets: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                nearest(augmented.view(), augmented.row(i), self.k, Some(i))
                    .into_iter()
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();

        Ok((0..self.n_classes)
            .map(|j| {
                labels[n - 1] = j;
                let mut counts = vec![0usize; self.n_classes];
                for (i, set) in neighbor_sets.iter().enumerate() {
                    counts[labels[i]] += set.iter().filter(|&&s| labels[s] == labels[i]).count();
                }
                coherence(&counts, &self.augmented_sizes(j), self.k)
            })
            .collect())
    }

    /// Same values as [`Self::coherence_direct`], obtained by patching the
    /// stored training counts: z joins a training point's neighbor list
    /// exactly when it is strictly closer than that point's k-th neighbor,
    /// which it then displaces.
    pub fn coherence_incremental(&self, z: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        check_dim(self.train_features.ncols(), z.len())?;
        let mut displaced_same = vec![0usize; self.n_classes];
        let mut entered = vec![0usize; self.n_classes];
        for (i, row) in self.train_features.rows().into_iter().enumerate() {
            if distance(row, z) < self.kth_distance[i] {
                let li = self.train_labels[i];
                entered[li] += 1;
                if self.kth_label[i] == li {
                    displaced_same[li] += 1;
                }
            }
        }
        let mut query_votes = vec![0usize; self.n_classes];
        for (i, _) in nearest(self.train_features.view(), z, self.k, None) {
            query_votes[self.train_labels[i]] += 1;
        }

        Ok((0..self.n_classes)
            .map(|j| {
                let counts: Vec<usize> = (0..self.n_classes)
                    .map(|i| {
                        let base = self.same_class[i] - displaced_same[i];
                        if i == j {
                            base + entered[i] + query_votes[j]
                        } else {
                            base
                        }
                    })
                    .collect();
                coherence(&counts, &self.augmented_sizes(j), self.k)
            })
            .collect())
    }

    pub fn predict_direct(&self, z: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.coherence_direct(z)?))
    }

    pub fn predict_incremental(&self, z: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.coherence_incremental(z)?))
    }
}
