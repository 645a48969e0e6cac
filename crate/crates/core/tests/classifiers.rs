mod common;

use ndarray::{array, Array1, Array2, Axis};
use proptest::prelude::*;
use rand::Rng;

use common::*;
use reducebench::classifiers::{
    svm_train_binary, ClassifierConfig, ClassifierKind, ClassifierModel, EnnModel, KnnModel,
    SvmMulticlassModel, SvmParams,
};

/// Integer grid points, so distance ties are common.
fn grid_matrix(r: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.gen_range(0..4) as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn knn_matches_full_sort_oracle(seed in any::<u64>(), n in 1usize..30, d in 1usize..4, classes in 1usize..4, tied in any::<bool>()) {
        let mut r = rng(seed);
        let classes = classes.min(n);
        let x = if tied { grid_matrix(&mut r, n, d) } else { uniform_matrix(&mut r, n, d, -1.0, 1.0) };
        let labels = covering_labels(&mut r, n, classes);
        let k = r.gen_range(1..=n);
        let model = KnnModel::fit(x.clone(), labels.clone(), classes, k).unwrap();
        for _ in 0..10 {
            let q: Array1<f64> = if tied {
                Array1::from_shape_simple_fn(d, || r.gen_range(0..4) as f64)
            } else {
                Array1::from_shape_simple_fn(d, || r.gen_range(-1.5..1.5))
            };
            let prediction = model.predict(q.view()).unwrap();
            prop_assert_eq!(prediction.class, knn_oracle(x.view(), &labels, classes, k, q.view()));
            prop_assert!((prediction.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for p in &prediction.probabilities {
                let votes = p * k as f64;
                prop_assert!((votes - votes.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn enn_incremental_equals_direct(seed in any::<u64>(), n in 4usize..=10, d in 1usize..=2, classes in 2usize..=3, tied in any::<bool>()) {
        let mut r = rng(seed);
        let x = if tied { grid_matrix(&mut r, n, d) } else { uniform_matrix(&mut r, n, d, 0.0, 1.0) };
        let labels = covering_labels(&mut r, n, classes);
        let k = r.gen_range(1..=3usize.min(n - 1));
        let model = EnnModel::fit(x, labels, classes, k).unwrap();
        for _ in 0..20 {
            let q: Array1<f64> = if tied {
                Array1::from_shape_simple_fn(d, || r.gen_range(0..4) as f64)
            } else {
                Array1::from_shape_simple_fn(d, || r.gen_range(-0.2..1.2))
            };
            let direct = model.coherence_direct(q.view()).unwrap();
            prop_assert_eq!(&direct, &model.coherence_incremental(q.view()).unwrap());
            prop_assert!(direct.iter().all(|&t| (0.0..=classes as f64).contains(&t)));
            prop_assert_eq!(model.predict_direct(q.view()).unwrap(), model.predict_incremental(q.view()).unwrap());
        }
        prop_assert!(model.baseline_stats.iter().all(|t| (0.0..=1.0).contains(t)));
    }

    #[test]
    fn svm_solution_satisfies_kkt(seed in any::<u64>(), n in 4usize..40, c in prop_oneof![Just(0.1), Just(1.0), Just(10.0)]) {
        // Not necessarily separable: labels come from a noisy line.
        let mut r = rng(seed);
        let x = uniform_matrix(&mut r, n, 2, -1.0, 1.0);
        let mut y: Vec<i8> = x
            .rows()
            .into_iter()
            .map(|p| if p[0] + 0.5 * p[1] + r.gen_range(-0.3..0.3) > 0.0 { 1 } else { -1 })
            .collect();
        y[0] = 1;
        y[1] = -1;
        let params = SvmParams { c, ..SvmParams::default() };
        let model = svm_train_binary(x.view(), &y, &params).unwrap();
        prop_assert!(model.converged);
        let report = kkt_report(&model, x.view(), &y);
        prop_assert!(report.box_ok);
        prop_assert!(report.equality_residual < 1e-8, "{report:?}");
        prop_assert!(report.max_residual < params.tol, "{report:?}");
    }

    #[test]
    fn svm_decisions_ignore_row_order(seed in any::<u64>()) {
        let (x, y) = separable_2d(seed, 20, 0.2);
        let params = SvmParams { c: 10.0, tol: 1e-8, ..SvmParams::default() };
        let model = svm_train_binary(x.view(), &y, &params).unwrap();
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        order.reverse();
        order.rotate_left(seed as usize % x.nrows());
        let xp = x.select(Axis(0), &order);
        let yp: Vec<i8> = order.iter().map(|&i| y[i]).collect();
        let permuted = svm_train_binary(xp.view(), &yp, &params).unwrap();
        let mut r = rng(seed);
        for _ in 0..20 {
            let q = array![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
            let (a, b) = (model.decision(q.view()).unwrap(), permuted.decision(q.view()).unwrap());
            prop_assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn predictions_are_pure(seed in any::<u64>()) {
        let (x, labels) = blobs(seed, 8, 3, 2, 3.0);
        let q = x.row(0).to_owned();
        for kind in ClassifierKind::ALL {
            let model = ClassifierModel::fit(kind, &ClassifierConfig::default(), x.view(), &labels, 3).unwrap();
            prop_assert_eq!(model.predict(q.view()).unwrap(), model.predict(q.view()).unwrap());
            let restored = ClassifierModel::from_json(&model.to_json().unwrap()).unwrap();
            prop_assert_eq!(restored, model);
        }
    }
}

#[test]
fn knn_engineered_ties_follow_index_then_class_rule() {
    // Four points at distance 1 from the origin; k = 2 takes indices 0 and 1.
    let x = array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let model = KnnModel::fit(x.clone(), vec![1, 0, 0, 0], 2, 2).unwrap();
    // Votes 1-1: the lower class wins.
    assert_eq!(model.predict_class(array![0.0, 0.0].view()).unwrap(), 0);
    let model = KnnModel::fit(x, vec![1, 1, 0, 0], 2, 2).unwrap();
    assert_eq!(model.predict_class(array![0.0, 0.0].view()).unwrap(), 1);
}

#[test]
fn svm_multiclass_three_clusters() {
    let x = array![[0.0], [0.2], [5.0], [5.2], [10.0], [10.2]];
    let labels = vec![0, 0, 1, 1, 2, 2];
    let model = SvmMulticlassModel::fit(x.view(), &labels, 3, &SvmParams::default()).unwrap();
    assert_eq!(model.pairs.len(), 3);
    assert_eq!(model.predict(array![5.1].view()).unwrap(), 1);
    assert_eq!(model.predict(array![-3.0].view()).unwrap(), 0);
    assert_eq!(model.predict(array![14.0].view()).unwrap(), 2);
}

#[test]
fn svm_binary_case_agrees_with_multiclass() {
    let (x, y) = separable_2d(11, 30, 0.1);
    let labels: Vec<usize> = y.iter().map(|&l| if l == 1 { 0 } else { 1 }).collect();
    let params = SvmParams::default();
    let binary = svm_train_binary(x.view(), &y, &params).unwrap();
    let multi = SvmMulticlassModel::fit(x.view(), &labels, 2, &params).unwrap();
    let mut r = rng(2);
    for _ in 0..50 {
        let q = array![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
        let expected = if binary.predict(q.view()).unwrap() == 1 {
            0
        } else {
            1
        };
        assert_eq!(multi.predict(q.view()).unwrap(), expected);
    }
}
