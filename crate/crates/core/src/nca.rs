//! Neighborhood Components Analysis.
//!
//! Learns a linear map `A` (p × m) that maximizes the expected number of
//! points correctly classified by stochastic leave-one-out neighbor
//! assignment, where point `i` picks neighbor `j` with probability
//! proportional to `exp(-||A x_i - A x_j||^2)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::dataset::seeded_rng;
use crate::error::{check_dim, Error, Result};

const FORMAT: &str = "reducebench-nca";
const FORMAT_VERSION: u32 = 1;
const MAX_BACKTRACKS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcaModel {
    /// Projection matrix, p × m.
    pub projection: Array2<f64>,
    /// Objective value at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    version: u32,
    p: usize,
    m: usize,
    model: NcaModel,
}

impl NcaModel {
    pub fn target_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn accepted_steps(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }

    /// Row-wise `A x`.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        transform(self.projection.view(), x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelRecord {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            p: self.target_dim(),
            m: self.input_dim(),
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ModelRecord = serde_json::from_str(text)?;
        if record.format != FORMAT || record.version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(record.version));
        }
        check_dim(record.p, record.model.target_dim())?;
        check_dim(record.m, record.model.input_dim())?;
        Ok(record.model)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NcaInit {
    /// First `p` rows of the identity plus uniform noise of `init_noise`.
    ScaledIdentity,
    /// Uniform entries in `[-1/sqrt(m), 1/sqrt(m)]`.
    SeededRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NcaConfig {
    /// Target dimension; `0` lets the harness pick `ceil(m / 2)`.
    pub p: usize,
    pub max_iters: usize,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    /// Stop once the relative objective improvement falls below this.
    pub tolerance: f64,
    pub seed: u64,
    pub init: NcaInit,
    pub init_noise: f64,
}

impl Default for NcaConfig {
    fn default() -> Self {
        Self {
            p: 0,
            max_iters: 200,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            tolerance: 1e-6,
            seed: 0,
            init: NcaInit::ScaledIdentity,
            init_noise: 1e-3,
        }
    }
}

impl NcaConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.initial_step > 0.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.tolerance > 0.0
            && self.init_noise >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "nca config out of range: {self:?}"
            )))
        }
    }
}

/// `(A x_i - A x_j)^T (A x_i - A x_j)`.
pub fn projected_distance(
    a: ArrayView2<'_, f64>,
    xi: ArrayView1<'_, f64>,
    xj: ArrayView1<'_, f64>,
) -> Result<f64> {
    check_dim(a.ncols(), xi.len())?;
    check_dim(a.ncols(), xj.len())?;
    let diff = &xi - &xj;
    let proj = a.dot(&diff);
    Ok(proj.dot(&proj))
}

pub fn transform(a: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_dim(a.ncols(), x.ncols())?;
    Ok(x.dot(&a.t()))
}

fn check_inputs(a: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<()> {
    check_dim(a.ncols(), x.ncols())?;
    if x.nrows() < 2 {
        return Err(Error::DegenerateInput(format!(
            "neighbor probabilities need at least 2 points, got {}",
            x.nrows()
        )));
    }
    Ok(())
}

/// Softmax over negative squared projected distances, with zero diagonal.
/// Each row is shifted by its largest logit before exponentiating.
pub fn neighbor_probabilities(
    a: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_inputs(a, x)?;
    let projected = x.dot(&a.t());
    Ok(probabilities_from_projected(projected.view()))
}

fn probabilities_from_projected(projected: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = projected.nrows();
    let sq_norms: Array1<f64> = projected.rows().into_iter().map(|r| r.dot(&r)).collect();
    let gram = projected.dot(&projected.t());
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        let mut row = p.row_mut(i);
        let mut max_logit = f64::NEG_INFINITY;
        for j in 0..n {
            if j == i {
                continue;
            }
            // Clamp rounding noise so distances stay non-negative.
            let d = (sq_norms[i] + sq_norms[j] - 2.0 * gram[[i, j]]).max(0.0);
            row[j] = -d;
            max_logit = max_logit.max(-d);
        }
        let mut total = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let e = (row[j] - max_logit).exp();
            row[j] = e;
            total += e;
        }
        row.mapv_inplace(|v| v / total);
        row[i] = 0.0;
    }
    p
}

fn check_labels(x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
    if labels.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: labels.len(),
        });
    }
    Ok(())
}

fn objective_from_probabilities(p: &Array2<f64>, labels: &[usize]) -> f64 {
    p.rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &yi)| {
            row.iter()
                .zip(labels)
                .filter(|(_, &yj)| yj == yi)
                .map(|(v, _)| v)
                .sum::<f64>()
        })
        .sum()
}

/// Expected number of correctly classified points, `sum_i sum_{j in C_i} P_ij`.
pub fn objective(a: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    check_labels(x, labels)?;
    let p = neighbor_probabilities(a, x)?;
    Ok(objective_from_probabilities(&p, labels))
}

/// Analytic gradient
/// `2A sum_i (p_i sum_k P_ik x_ik x_ik^T - sum_{j in C_i} P_ij x_ij x_ij^T)`.
pub fn objective_gradient(
    a: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<Array2<f64>> {
    check_labels(x, labels)?;
    let p = neighbor_probabilities(a, x)?;
    Ok(gradient_from_probabilities(a, x, &p, labels))
}

fn gradient_from_probabilities(
    a: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    p: &Array2<f64>,
    labels: &[usize],
) -> Array2<f64> {
    let n = x.nrows();
    // Pair weights W_ik = p_i P_ik - [y_i = y_k] P_ik, then
    // sum_ik W_ik x_ik x_ik^T = X^T (diag(rowsum + colsum) - W - W^T) X.
    let p_correct: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| labels[k] == labels[i])
                .map(|k| p[[i, k]])
                .sum()
        })
        .collect();
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for k in 0..n {
            let same = if labels[i] == labels[k] {
                p[[i, k]]
            } else {
                0.0
            };
            w[[i, k]] = p_correct[i] * p[[i, k]] - same;
        }
    }
    let row_sums = w.sum_axis(Axis(1));
    let col_sums = w.sum_axis(Axis(0));
    let mut laplacian = -(&w + &w.t());
    for i in 0..n {
        laplacian[[i, i]] += row_sums[i] + col_sums[i];
    }
    let inner = x.t().dot(&laplacian).dot(&x);
    a.dot(&inner) * 2.0
}

/// Initial projection for `fit_nca`.
pub fn initial_projection(m: usize, config: &NcaConfig) -> Array2<f64> {
    let p = config.p;
    let mut rng = seeded_rng(config.seed);
    match config.init {
        NcaInit::ScaledIdentity => {
            let mut a = Array2::eye(m).slice(ndarray::s![..p, ..]).to_owned();
            if config.init_noise > 0.0 {
                let noise = Uniform::new_inclusive(-config.init_noise, config.init_noise);
                a.mapv_inplace(|v| v + noise.sample(&mut rng));
            }
            a
        }
        NcaInit::SeededRandom => {
            let bound = 1.0 / (m as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            Array2::from_shape_simple_fn((p, m), || dist.sample(&mut rng))
        }
    }
}

/// Gradient ascent with backtracking line search.
///
/// Each iteration tries `A + step * grad`, shrinking `step` by
/// `backtrack_factor` until the objective strictly increases. After an
/// accepted step the next trial step grows by `1 / backtrack_factor`. Stops at
/// `max_iters`, when no trial step improves the objective, or when the
/// relative improvement drops below `tolerance`.
pub fn fit_nca(
    x_train: ArrayView2<'_, f64>,
    labels: &[usize],
    config: &NcaConfig,
) -> Result<NcaModel> {
    config.validate()?;
    check_labels(x_train, labels)?;
    let m = x_train.ncols();
    if config.p == 0 || config.p > m {
        return Err(Error::InvalidTargetDim {
            target: config.p,
            input_dim: m,
        });
    }
    if x_train.nrows() < 2 {
        return Err(Error::DegenerateInput(
            "nca needs at least 2 training points".into(),
        ));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass);
    }

    let mut a = initial_projection(m, config);
    let mut probs = neighbor_probabilities(a.view(), x_train)?;
    let mut f = objective_from_probabilities(&probs, labels);
    let mut trace = vec![f];
    let mut converged = false;
    let mut step = config.initial_step;

    for _ in 0..config.max_iters {
        let grad = gradient_from_probabilities(a.view(), x_train, &probs, labels);
        if grad.iter().all(|&g| g == 0.0) {
            converged = true;
            break;
        }
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = &a + &(&grad * step);
            let cand_probs = neighbor_probabilities(candidate.view(), x_train)?;
            let cand_f = objective_from_probabilities(&cand_probs, labels);
            if cand_f.is_finite() && cand_f > f {
                accepted = Some((candidate, cand_probs, cand_f));
                break;
            }
            step *= config.backtrack_factor;
        }
        let Some((candidate, cand_probs, cand_f)) = accepted else {
            converged = true;
            break;
        };
        let improvement = (cand_f - f) / f.abs().max(f64::MIN_POSITIVE);
        a = candidate;
        probs = cand_probs;
        f = cand_f;
        trace.push(f);
        step /= config.backtrack_factor;
        if improvement < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(NcaModel {
        projection: a,
        objective_trace: trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn probabilities_examples() {
        let a = array![[1.0]];
        let x = array![[0.0], [1.0], [2.0]];
        let p = neighbor_probabilities(a.view(), x.view()).unwrap();
        let e1 = (-1.0f64).exp();
        let e4 = (-4.0f64).exp();
        assert!((p[[0, 1]] - e1 / (e1 + e4)).abs() < 1e-15);
        assert!((p[[0, 1]] - 0.952_574_126_822_433_4).abs() < 1e-12);
        assert!((p[[0, 2]] - 0.047_425_873_177_566_78).abs() < 1e-12);
        for i in 0..3 {
            assert_eq!(p[[i, i]], 0.0);
        }

        let two = neighbor_probabilities(
            array![[0.3, -2.0]].view(),
            array![[1.0, 2.0], [5.0, -1.0]].view(),
        )
        .unwrap();
        assert_eq!(two, array![[0.0, 1.0], [1.0, 0.0]]);

        assert!(matches!(
            neighbor_probabilities(a.view(), array![[1.0]].view()),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            neighbor_probabilities(a.view(), array![[1.0, 2.0], [0.0, 0.0]].view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn far_points_do_not_overflow() {
        let x = array![[0.0], [100.0], [200.0]];
        let p = neighbor_probabilities(array![[1.0]].view(), x.view()).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.row(1).sum() - 1.0).abs() < 1e-12);
        assert_eq!(p[[0, 1]], 1.0);
    }

    #[test]
    fn distance_examples() {
        let id = Array2::eye(2);
        let zero = Array2::zeros((2, 2));
        let (a, b) = (array![0.0, 0.0], array![3.0, 4.0]);
        assert_eq!(
            projected_distance(id.view(), a.view(), b.view()).unwrap(),
            25.0
        );
        assert_eq!(
            projected_distance(id.view(), b.view(), b.view()).unwrap(),
            0.0
        );
        assert_eq!(
            projected_distance(zero.view(), a.view(), b.view()).unwrap(),
            0.0
        );
        assert!(projected_distance(id.view(), array![1.0].view(), b.view()).is_err());
    }

    #[test]
    fn objective_examples() {
        let a = array![[1.0]];
        let x = array![[0.0], [1.0], [2.0]];
        let f = objective(a.view(), x.view(), &[0, 0, 1]).unwrap();
        let e1 = (-1.0f64).exp();
        let e4 = (-4.0f64).exp();
        assert!((f - (e1 / (e1 + e4) + 0.5)).abs() < 1e-15);
        assert!((f - 1.452_574_126_822_433_4).abs() < 1e-12);

        let all_same = objective(a.view(), x.view(), &[0, 0, 0]).unwrap();
        assert!((all_same - 3.0).abs() < 1e-12);
        assert_eq!(objective(a.view(), x.view(), &[0, 1, 2]).unwrap(), 0.0);
        assert!(objective(a.view(), x.view(), &[0, 1]).is_err());
    }

    #[test]
    fn gradient_zero_cases() {
        let x = array![[0.0, 1.0], [1.0, 0.5], [2.0, 0.0]];
        let zero = Array2::zeros((1, 2));
        let g = objective_gradient(zero.view(), x.view(), &[0, 1, 0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));

        let g = objective_gradient(
            array![[0.7, -0.2]].view(),
            array![[0.1, 0.2], [0.9, 0.4]].view(),
            &[0, 0],
        )
        .unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn transform_examples() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let id = Array2::eye(2);
        assert_eq!(transform(id.view(), x.view()).unwrap(), x);
        let zero = Array2::zeros((1, 2));
        assert_eq!(
            transform(zero.view(), x.view()).unwrap(),
            array![[0.0], [0.0]]
        );
        assert!(transform(id.view(), array![[1.0]].view()).is_err());
    }

    #[test]
    fn fit_stops_without_improvement() {
        // Classes are so far apart that f already equals n in floating point.
        let x = array![[0.0, 0.0], [0.1, 0.0], [100.0, 0.0], [100.1, 0.0]];
        let labels = [0, 0, 1, 1];
        let config = NcaConfig {
            p: 2,
            init_noise: 0.0,
            tolerance: 1e9,
            ..Default::default()
        };
        let model = fit_nca(x.view(), &labels, &config).unwrap();
        assert_eq!(model.projection, Array2::<f64>::eye(2));
        assert_eq!(model.accepted_steps(), 0);
        assert!(model.converged);
    }

    #[test]
    fn fit_contract_errors() {
        let x = array![[0.0], [1.0], [2.0]];
        let cfg = NcaConfig {
            p: 1,
            ..Default::default()
        };
        assert!(matches!(
            fit_nca(x.view(), &[0, 0, 0], &cfg),
            Err(Error::SingleClass)
        ));
        let too_wide = NcaConfig {
            p: 2,
            ..Default::default()
        };
        assert!(matches!(
            fit_nca(x.view(), &[0, 1, 0], &too_wide),
            Err(Error::InvalidTargetDim { .. })
        ));
    }

    #[test]
    fn fit_trace_is_monotone_and_model_round_trips() {
        let x = array![
            [0.0, 0.1, 0.9],
            [0.2, 0.8, 0.1],
            [0.1, 0.3, 0.5],
            [0.9, 0.2, 0.4],
            [0.8, 0.9, 0.6],
            [1.0, 0.5, 0.2]
        ];
        let labels = [0, 0, 0, 1, 1, 1];
        let cfg = NcaConfig {
            p: 2,
            seed: 11,
            ..Default::default()
        };
        let model = fit_nca(x.view(), &labels, &cfg).unwrap();
        assert!(model.objective_trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(model.objective_trace.last() > model.objective_trace.first());
        let back = NcaModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(model.transform(x.view()).unwrap().ncols(), 2);
    }
}
