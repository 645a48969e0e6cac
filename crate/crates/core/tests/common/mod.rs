//! Independent oracles and data generators shared by the integration and
//! acceptance tests. Nothing here calls the code path it checks.

#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reducebench::autoencoder::{Activation, AutoencoderModel};
use reducebench::classifiers::SvmBinaryModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(lo..hi))
}

/// Labels in `0..classes` with every class present (needs `n >= classes`).
pub fn covering_labels(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            if i < classes {
                i
            } else {
                rng.gen_range(0..classes)
            }
        })
        .collect();
    // Shuffle so the guaranteed members are not always the first rows.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    labels
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---------------------------------------------------------------- NCA

/// Sum over points of the probability of choosing a same-class neighbor,
/// computed naively from unnormalised weights.
pub fn nca_objective_oracle(
    a: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
) -> f64 {
    let projected: Vec<Array1<f64>> = x.rows().into_iter().map(|r| a.dot(&r)).collect();
    let n = projected.len();
    let mut total = 0.0;
    for i in 0..n {
        let weights: Vec<f64> = (0..n)
            .map(|k| {
                if k == i {
                    0.0
                } else {
                    (-sq_dist(projected[i].view(), projected[k].view())).exp()
                }
            })
            .collect();
        let z: f64 = weights.iter().sum();
        let same: f64 = (0..n)
            .filter(|&k| labels[k] == labels[i])
            .map(|k| weights[k])
            .sum();
        total += same / z;
    }
    total
}

/// Central finite differences of `f` around `a`.
pub fn finite_difference(
    a: &Array2<f64>,
    step: f64,
    f: impl Fn(&Array2<f64>) -> f64,
) -> Array2<f64> {
    let mut grad = Array2::zeros(a.dim());
    for idx in ndarray::indices(a.dim()) {
        let mut plus = a.clone();
        plus[idx] += step;
        let mut minus = a.clone();
        minus[idx] -= step;
        grad[idx] = (f(&plus) - f(&minus)) / (2.0 * step);
    }
    grad
}

/// `||g - h|| / max(||g||, ||h||)`, 0 when both vanish.
pub fn relative_error(g: &[f64], h: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = g.iter().zip(h).map(|(a, b)| a - b).collect();
    let scale = norm(g).max(norm(h));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Leave-one-out 1-NN accuracy under the projection `a`.
pub fn loo_1nn_accuracy(a: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>, labels: &[usize]) -> f64 {
    let projected: Vec<Array1<f64>> = x.rows().into_iter().map(|r| a.dot(&r)).collect();
    let n = projected.len();
    let correct = (0..n)
        .filter(|&i| {
            let nearest = (0..n)
                .filter(|&k| k != i)
                .min_by(|&p, &q| {
                    sq_dist(projected[i].view(), projected[p].view())
                        .total_cmp(&sq_dist(projected[i].view(), projected[q].view()))
                })
                .unwrap();
            labels[nearest] == labels[i]
        })
        .count();
    correct as f64 / n as f64
}

// ---------------------------------------------------------------- autoencoder

fn activate(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Identity => z,
    }
}

/// Summed squared reconstruction error from a plain loop forward pass.
pub fn ae_loss_oracle(model: &AutoencoderModel, x: ArrayView2<'_, f64>) -> f64 {
    let mut total = 0.0;
    for row in x.rows() {
        let mut a: Vec<f64> = row.to_vec();
        for layer in model.layers() {
            a = (0..layer.weights.nrows())
                .map(|o| {
                    let z = layer.bias[o]
                        + (0..a.len())
                            .map(|i| layer.weights[[o, i]] * a[i])
                            .sum::<f64>();
                    activate(layer.activation, z)
                })
                .collect();
        }
        total += a
            .iter()
            .zip(row)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
    }
    total
}

/// Mutable parameter slot `(layer, is_bias, flat index)` of a model.
fn param_mut(model: &mut AutoencoderModel, layer: usize, bias: bool, idx: usize) -> &mut f64 {
    let n_enc = model.encoder_layers.len();
    let params = if layer < n_enc {
        &mut model.encoder_layers[layer]
    } else {
        &mut model.decoder_layers[layer - n_enc]
    };
    if bias {
        &mut params.bias[idx]
    } else {
        let cols = params.weights.ncols();
        &mut params.weights[[idx / cols, idx % cols]]
    }
}

/// Backpropagated and finite-difference gradients, flattened in the same
/// order (per layer: weights row-major, then bias).
pub fn ae_gradients_vs_fd(
    model: &AutoencoderModel,
    x: ArrayView2<'_, f64>,
    step: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (_, grads) = model.gradients(x).unwrap();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (l, g) in grads.iter().enumerate() {
        let weights: Vec<f64> = g.weights.iter().copied().collect();
        let biases: Vec<f64> = g.bias.to_vec();
        for (bias, values) in [(false, weights), (true, biases)] {
            for (idx, value) in values.into_iter().enumerate() {
                analytic.push(value);
                let mut plus = model.clone();
                *param_mut(&mut plus, l, bias, idx) += step;
                let mut minus = model.clone();
                *param_mut(&mut minus, l, bias, idx) -= step;
                numeric.push((ae_loss_oracle(&plus, x) - ae_loss_oracle(&minus, x)) / (2.0 * step));
            }
        }
    }
    (analytic, numeric)
}

/// `n` points of `[0,1]^8` on a random 2-D affine plane through the centre.
pub fn planar_data(seed: u64, n: usize) -> Array2<f64> {
    let mut r = rng(seed);
    let d = 8;
    // Direction entries bounded by 0.2 keep every coordinate within [0.1, 0.9].
    let u: Vec<f64> = (0..d).map(|_| r.gen_range(-0.2..0.2)).collect();
    let v: Vec<f64> = (0..d).map(|_| r.gen_range(-0.2..0.2)).collect();
    let mut x = Array2::zeros((n, d));
    for i in 0..n {
        let (s, t): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        for j in 0..d {
            x[[i, j]] = 0.5 + s * u[j] + t * v[j];
        }
    }
    x
}

// ---------------------------------------------------------------- KNN

/// Majority vote of the k nearest rows after a full sort by
/// (distance, index); vote ties go to the lower class.
pub fn knn_oracle(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    k: usize,
    q: ArrayView1<'_, f64>,
) -> usize {
    let mut order: Vec<(f64, usize)> = x
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| (sq_dist(r, q).sqrt(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes = vec![0usize; n_classes];
    for &(_, i) in order.iter().take(k) {
        votes[labels[i]] += 1;
    }
    let best = *votes.iter().max().unwrap();
    votes.iter().position(|&v| v == best).unwrap()
}

// ---------------------------------------------------------------- SVM

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub max_residual: f64,
    pub equality_residual: f64,
    pub box_ok: bool,
}

/// Recovers every training point's dual coefficient (0 for non-support
/// vectors) and measures its KKT violation against the decision function.
pub fn kkt_report(model: &SvmBinaryModel, x: ArrayView2<'_, f64>, y: &[i8]) -> KktReport {
    let mut alphas = vec![0.0; x.nrows()];
    for (sv, &a) in model.support_vectors.rows().into_iter().zip(&model.alphas) {
        let i = x
            .rows()
            .into_iter()
            .position(|r| r == sv)
            .expect("support vector comes from the training set");
        alphas[i] = a;
    }
    let c = model.c;
    let box_ok = alphas.iter().all(|&a| (0.0..=c).contains(&a));
    let equality_residual = alphas
        .iter()
        .zip(y)
        .map(|(a, &l)| a * l as f64)
        .sum::<f64>()
        .abs();
    let max_residual = x
        .rows()
        .into_iter()
        .zip(alphas.iter().zip(y))
        .map(|(row, (&a, &l))| {
            let margin = l as f64 * model.decision(row).unwrap();
            if a == 0.0 {
                (1.0 - margin).max(0.0)
            } else if a == c {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            }
        })
        .fold(0.0, f64::max);
    KktReport {
        max_residual,
        equality_residual,
        box_ok,
    }
}

/// Random 2-D points labelled by a random line, keeping a gap of `gap`
/// around it. Both labels are guaranteed.
pub fn separable_2d(seed: u64, n: usize, gap: f64) -> (Array2<f64>, Vec<i8>) {
    let mut r = rng(seed);
    let angle: f64 = r.gen_range(0.0..std::f64::consts::TAU);
    let (wx, wy) = (angle.cos(), angle.sin());
    let offset: f64 = r.gen_range(-0.5..0.5);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < n {
        let p: (f64, f64) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let s = wx * p.0 + wy * p.1 - offset;
        if s.abs() < gap {
            continue;
        }
        // Alternate the sides for the first two points so both labels exist.
        let want = match rows.len() {
            0 => Some(true),
            1 => Some(false),
            _ => None,
        };
        if want.is_some_and(|w| w != (s > 0.0)) {
            continue;
        }
        rows.push([p.0, p.1]);
        labels.push(if s > 0.0 { 1 } else { -1 });
    }
    let x = Array2::from_shape_fn((n, 2), |(i, j)| rows[i][j]);
    (x, labels)
}

pub fn xor() -> (Array2<f64>, Vec<i8>) {
    (
        ndarray::array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]],
        vec![1, 1, -1, -1],
    )
}

// ---------------------------------------------------------------- data sets

/// Clusters far apart relative to their spread, one per class.
pub fn blobs(
    seed: u64,
    per_class: usize,
    classes: usize,
    d: usize,
    spread: f64,
) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let centres = uniform_matrix(&mut r, classes, d, 0.0, 10.0);
    let n = per_class * classes;
    let mut x = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for j in 0..d {
            x[[i, j]] = centres[[c, j]] + r.gen_range(-spread..spread);
        }
        labels.push(c);
    }
    (x, labels)
}

/// Writes a headerless CSV with the label in the last column.
pub fn write_csv(path: &std::path::Path, x: ArrayView2<'_, f64>, labels: &[usize]) {
    let mut text = String::new();
    for (row, l) in x.rows().into_iter().zip(labels) {
        for v in row {
            text.push_str(&format!("{v},"));
        }
        text.push_str(&format!("c{l}\n"));
    }
    std::fs::write(path, text).unwrap();
}
