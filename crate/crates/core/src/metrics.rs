//! Confusion matrices and the three reported scores: accuracy,
//! macro-averaged F1 and the geometric mean of per-class recalls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if let Some(row) = counts.iter().find(|r| r.len() != c) {
            return Err(Error::LengthMismatch {
                left: c,
                right: row.len(),
            });
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    /// `tp / predicted`, 0 when the class was never predicted.
    pub fn precision(&self, class: usize) -> f64 {
        ratio(self.counts[class][class], self.col_sum(class))
    }

    /// `tp / actual`, 0 when the class never occurs.
    pub fn recall(&self, class: usize) -> f64 {
        ratio(self.counts[class][class], self.row_sum(class))
    }

    fn non_empty(&self) -> Result<()> {
        if self.total() == 0 {
            Err(Error::EmptyMatrix)
        } else {
            Ok(())
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(
    true_labels: &[usize],
    predicted: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    if true_labels.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: true_labels.len(),
            right: predicted.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: n_classes,
                });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.non_empty()?;
    Ok(cm.correct() as f64 / cm.total() as f64)
}

/// Unweighted mean of per-class F1, with `F_j = 0` when precision and
/// recall are both zero.
pub fn macro_f_measure(cm: &ConfusionMatrix) -> Result<f64> {
    cm.non_empty()?;
    let c = cm.n_classes();
    let sum: f64 = (0..c)
        .map(|j| {
            let (p, r) = (cm.precision(j), cm.recall(j));
            if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            }
        })
        .sum();
    Ok(sum / c as f64)
}

/// Geometric mean of per-class recalls over the classes that occur.
pub fn g_mean(cm: &ConfusionMatrix) -> Result<f64> {
    cm.non_empty()?;
    let recalls: Vec<f64> = (0..cm.n_classes())
        .filter(|&j| cm.row_sum(j) > 0)
        .map(|j| cm.recall(j))
        .collect();
    if recalls.contains(&0.0) {
        return Ok(0.0);
    }
    let count = recalls.len();
    let product: f64 = recalls.iter().product();
    let root = match count {
        1 => product,
        2 => product.sqrt(),
        // Underflow with many classes: fall back to the mean log.
        _ if product == 0.0 => (recalls.iter().map(|r| r.ln()).sum::<f64>() / count as f64).exp(),
        _ => product.powf(1.0 / count as f64),
    };
    Ok(root.min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f_measure: f64,
    pub g_mean: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(cm)?,
            f_measure: macro_f_measure(cm)?,
            g_mean: g_mean(cm)?,
            per_class_precision: (0..cm.n_classes()).map(|j| cm.precision(j)).collect(),
            per_class_recall: (0..cm.n_classes()).map(|j| cm.recall(j)).collect(),
        })
    }
}
