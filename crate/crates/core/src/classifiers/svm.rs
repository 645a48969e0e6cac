//! Soft-margin SVM solved in the dual by sequential minimal optimization,
//! plus one-vs-one voting for more than two classes.
//!
//! The dual is `min 1/2 a^T Q a - e^T a` subject to `0 <= a_i <= C` and
//! `sum_i y_i a_i = 0`, with `Q_ij = y_i y_j K(x_i, x_j)`. Each iteration
//! picks the maximal violating pair and solves the two-variable subproblem
//! analytically.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::validate_training;
use crate::error::{check_dim, Error, Result};

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Linear,
}

impl Kernel {
    pub fn eval(self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self {
            Kernel::Linear => a.dot(&b),
        }
    }

    fn gram(self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Kernel::Linear => x.dot(&x.t()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub kernel: Kernel,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
            kernel: Kernel::Linear,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if self.c > 0.0 && self.tol > 0.0 && self.max_iter > 0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "svm parameters out of range: {self:?}"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmBinaryModel {
    pub support_vectors: Array2<f64>,
    /// Dual coefficients of the support vectors, each in `(0, C]`.
    pub alphas: Vec<f64>,
    /// +1 or -1 per support vector.
    pub support_labels: Vec<f64>,
    pub bias: f64,
    pub kernel: Kernel,
    pub c: f64,
    /// False when `max_iter` was reached before the KKT tolerance held.
    pub converged: bool,
    pub iterations: usize,
}

impl SvmBinaryModel {
    /// `sum_j a_j y_j K(x_j, z) + b`; the sign selects the class.
    pub fn decision(&self, z: ArrayView1<'_, f64>) -> Result<f64> {
        if self.alphas.is_empty() {
            return Err(Error::ModelUntrained);
        }
        check_dim(self.support_vectors.ncols(), z.len())?;
        let sum: f64 = self
            .support_vectors
            .rows()
            .into_iter()
            .zip(self.alphas.iter().zip(&self.support_labels))
            .map(|(sv, (a, y))| a * y * self.kernel.eval(sv, z))
            .sum();
        Ok(sum + self.bias)
    }

    /// +1 for a non-negative decision value, otherwise -1.
    pub fn predict(&self, z: ArrayView1<'_, f64>) -> Result<i8> {
        Ok(if self.decision(z)? >= 0.0 { 1 } else { -1 })
    }

    /// Primal weight vector `sum_j a_j y_j x_j` of the linear kernel.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.support_vectors.ncols()];
        for (sv, (a, y)) in self
            .support_vectors
            .rows()
            .into_iter()
            .zip(self.alphas.iter().zip(&self.support_labels))
        {
            for (wi, xi) in w.iter_mut().zip(sv) {
                *wi += a * y * xi;
            }
        }
        w
    }

    /// Geometric margin `2 / ||w||` of the linear kernel.
    pub fn margin(&self) -> f64 {
        2.0 / self.weights().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Trains a binary soft-margin SVM on labels in {+1, -1}.
///
/// Runs until `max_{I_up} -y G - min_{I_low} -y G < tol` or `max_iter`
/// updates; in the latter case the last iterate is returned with
/// `converged = false`. The bias averages `-y_t G_t` over free vectors, or
/// takes the midpoint of the feasible interval when none is free.
pub fn svm_train_binary(
    features: ArrayView2<'_, f64>,
    labels: &[i8],
    params: &SvmParams,
) -> Result<SvmBinaryModel> {
    params.validate()?;
    if features.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: labels.len(),
        });
    }
    if labels.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::InvalidConfig(
            "binary SVM labels must be +1 or -1".into(),
        ));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::SingleClass);
    }

    let n = labels.len();
    let c = params.c;
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let k = params.kernel.gram(features);
    let mut alpha = vec![0.0; n];
    // Gradient of the dual objective, Q a - e.
    let mut grad = vec![-1.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(y[t], alpha[t], c) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(y[t], alpha[t], c) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k[[i, j]];
        if y[i] != y[j] {
            let quad = (k[[i, i]] + k[[j, j]] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[[i, i]] + k[[j, j]] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[[t, i]] * di + y[j] * k[[t, j]] * dj);
        }
    }

    if !converged {
        log::warn!(
            "SMO stopped after {iterations} iterations without meeting tol {}",
            params.tol
        );
    }

    let bias = -rho(&y, &alpha, &grad, c);
    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmBinaryModel {
        support_vectors: features.select(Axis(0), &support),
        alphas: support.iter().map(|&t| alpha[t]).collect(),
        support_labels: support.iter().map(|&t| y[t]).collect(),
        bias,
        kernel: params.kernel,
        c,
        converged,
        iterations,
    })
}

fn rho(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free_sum += yg;
            free += 1;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else if upper.is_finite() && lower.is_finite() {
        (upper + lower) / 2.0
    } else if upper.is_finite() {
        upper
    } else {
        lower
    }
}

/// One binary model per unordered class pair; `positive` is the lower class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseModel {
    pub positive: usize,
    pub negative: usize,
    pub model: SvmBinaryModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmMulticlassModel {
    pub n_classes: usize,
    pub pairs: Vec<PairwiseModel>,
}

impl SvmMulticlassModel {
    /// Trains the `C(C-1)/2` pairwise problems in parallel. Results are
    /// collected in pair order, so they do not depend on scheduling.
    pub fn fit(
        features: ArrayView2<'_, f64>,
        labels: &[usize],
        n_classes: usize,
        params: &SvmParams,
    ) -> Result<Self> {
        validate_training(features, labels, n_classes)?;
        let mut counts = vec![0usize; n_classes];
        for &l in labels {
            counts[l] += 1;
        }
        if n_classes < 2 {
            return Err(Error::SingleClass);
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyClass(empty));
        }
        let pair_list: Vec<(usize, usize)> = (0..n_classes)
            .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
            .collect();
        let pairs = pair_list
            .par_iter()
            .map(|&(a, b)| {
                let rows: Vec<usize> = (0..labels.len())
                    .filter(|&i| labels[i] == a || labels[i] == b)
                    .collect();
                let sub = features.select(Axis(0), &rows);
                let signs: Vec<i8> = rows
                    .iter()
                    .map(|&i| if labels[i] == a { 1 } else { -1 })
                    .collect();
                Ok(PairwiseModel {
                    positive: a,
                    negative: b,
                    model: svm_train_binary(sub.view(), &signs, params)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_classes, pairs })
    }

    /// One-vs-one vote. Ties go to the class with the larger summed
    /// |decision| over the contests it won, then to the lower class.
    pub fn predict(&self, z: ArrayView1<'_, f64>) -> Result<usize> {
        let mut votes = vec![0usize; self.n_classes];
        let mut strength = vec![0.0f64; self.n_classes];
        for pair in &self.pairs {
            let value = pair.model.decision(z)?;
            let winner = if value >= 0.0 {
                pair.positive
            } else {
                pair.negative
            };
            votes[winner] += 1;
            strength[winner] += value.abs();
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && strength[c] > strength[best]) {
                best = c;
            }
        }
        Ok(best)
    }

    pub fn converged(&self) -> bool {
        self.pairs.iter().all(|p| p.model.converged)
    }
}
