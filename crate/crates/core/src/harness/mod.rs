//! Benchmark pipeline: load, split 90:10, scale, reduce to half width,
//! classify, score. Every (dataset, reducer, repetition) unit is independent
//! and derives all of its randomness from `base_seed + repetition`.

pub mod cli;
pub mod config;
pub mod report;

use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{half_dim, train_autoencoder, AutoencoderModel};
use crate::classifiers::{ClassifierKind, ClassifierModel};
use crate::dataset::{apply_scaler, fit_scaler, stratified_split, Dataset, Split, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{confusion, ConfusionMatrix, MetricsReport};
use crate::nca::{fit_nca, NcaModel};

pub use config::{DatasetEntry, ReducerKind, RunConfig};
pub use report::{emit_reports, ReportFiles};

/// Environment variable capping cell parallelism; 0 or unset means one
/// thread per core.
pub const THREADS_ENV: &str = "REDUCEBENCH_THREADS";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub reduce_secs: f64,
    pub train_secs: f64,
    pub predict_secs: f64,
}

/// Reducer-side facts recorded with every cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducerDiagnostics {
    /// Final mean reconstruction error (autoencoder) or objective (NCA).
    pub final_loss: Option<f64>,
    pub converged: Option<bool>,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub reducer: ReducerKind,
    pub classifier: ClassifierKind,
    pub repetition: usize,
    pub seed: u64,
    pub original_dim: usize,
    pub reduced_dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub reducer_diagnostics: ReducerDiagnostics,
    /// False only for an SVM whose SMO hit its iteration cap.
    pub classifier_converged: bool,
    pub timings: PhaseTimings,
}

/// A reducer fitted on a training partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedReducer {
    None { dim: usize },
    Autoencoder(AutoencoderModel),
    Nca(NcaModel),
}

impl FittedReducer {
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            FittedReducer::None { dim } => {
                crate::error::check_dim(*dim, x.ncols())?;
                Ok(x.to_owned())
            }
            FittedReducer::Autoencoder(m) => m.reduce(x),
            FittedReducer::Nca(m) => m.transform(x),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FittedReducer::None { dim } => *dim,
            FittedReducer::Autoencoder(m) => m.code_dim,
            FittedReducer::Nca(m) => m.target_dim(),
        }
    }

    fn diagnostics(&self) -> ReducerDiagnostics {
        match self {
            FittedReducer::None { .. } => ReducerDiagnostics {
                final_loss: None,
                converged: None,
                steps: 0,
            },
            FittedReducer::Autoencoder(m) => ReducerDiagnostics {
                final_loss: m.loss_trace.last().copied(),
                converged: None,
                steps: m.loss_trace.len(),
            },
            FittedReducer::Nca(m) => ReducerDiagnostics {
                final_loss: m.objective_trace.last().copied(),
                converged: Some(m.converged),
                steps: m.accepted_steps(),
            },
        }
    }
}

/// Fits a reducer to half the input width. `seed` replaces the seed fields
/// of the autoencoder and NCA blocks.
pub fn fit_reducer(
    kind: ReducerKind,
    x_train: ArrayView2<'_, f64>,
    y_train: &[usize],
    config: &RunConfig,
    seed: u64,
) -> Result<FittedReducer> {
    let d = x_train.ncols();
    Ok(match kind {
        ReducerKind::None => FittedReducer::None { dim: d },
        ReducerKind::Autoencoder => {
            let mut ae = config.autoencoder.clone();
            ae.seed = seed;
            FittedReducer::Autoencoder(train_autoencoder(x_train, half_dim(d), &ae)?)
        }
        ReducerKind::Nca => {
            let mut nca = config.nca.clone();
            nca.seed = seed;
            nca.p = half_dim(d);
            FittedReducer::Nca(fit_nca(x_train, y_train, &nca)?)
        }
    })
}

/// Scaled train/test partitions of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Fold {
    pub split: Split,
    pub train_x: Array2<f64>,
    pub train_y: Vec<usize>,
    pub test_x: Array2<f64>,
    pub test_y: Vec<usize>,
}

/// Splits and min-max scales with parameters fitted on the training rows.
pub fn prepare_fold(dataset: &Dataset, config: &RunConfig, seed: u64) -> Result<Fold> {
    let spec = SplitSpec {
        train_fraction: config.train_fraction,
        seed,
        stratified: config.stratified,
    };
    let split = stratified_split(dataset, &spec)?;
    let raw_train = dataset.select_features(&split.train);
    let scaler = fit_scaler(raw_train.view())?;
    Ok(Fold {
        train_x: apply_scaler(&scaler, raw_train.view())?,
        train_y: dataset.select_labels(&split.train),
        test_x: apply_scaler(&scaler, dataset.select_features(&split.test).view())?,
        test_y: dataset.select_labels(&split.test),
        split,
    })
}

/// Everything produced by one (dataset, reducer, repetition) unit.
#[derive(Clone, Debug)]
pub struct UnitOutcome {
    pub reducer: FittedReducer,
    pub models: Vec<ClassifierModel>,
    pub cells: Vec<CellResult>,
}

/// Runs one reducer and every configured classifier on one repetition.
pub fn run_unit(
    dataset: &Dataset,
    reducer: ReducerKind,
    repetition: usize,
    config: &RunConfig,
) -> Result<UnitOutcome> {
    let seed = config.repetition_seed(repetition);
    let annotate = |classifier: Option<ClassifierKind>, e: Error| {
        let clf = classifier.map_or("-", ClassifierKind::name);
        e.context(format!(
            "dataset={} reducer={} classifier={} seed={}",
            dataset.name,
            reducer.name(),
            clf,
            seed
        ))
    };

    let fold = prepare_fold(dataset, config, seed).map_err(|e| annotate(None, e))?;
    let started = Instant::now();
    let fitted = fit_reducer(reducer, fold.train_x.view(), &fold.train_y, config, seed)
        .map_err(|e| annotate(None, e))?;
    let train_r = fitted
        .transform(fold.train_x.view())
        .map_err(|e| annotate(None, e))?;
    let test_r = fitted
        .transform(fold.test_x.view())
        .map_err(|e| annotate(None, e))?;
    let reduce_secs = started.elapsed().as_secs_f64();
    let diagnostics = fitted.diagnostics();

    let mut models = Vec::with_capacity(config.classifiers.len());
    let mut cells = Vec::with_capacity(config.classifiers.len());
    for &kind in &config.classifiers {
        let started = Instant::now();
        let model = ClassifierModel::fit(
            kind,
            &config.classifier_config(),
            train_r.view(),
            &fold.train_y,
            dataset.n_classes(),
        )
        .map_err(|e| annotate(Some(kind), e))?;
        let train_secs = started.elapsed().as_secs_f64();
        let started = Instant::now();
        let predicted = model
            .predict_rows(test_r.view())
            .map_err(|e| annotate(Some(kind), e))?;
        let predict_secs = started.elapsed().as_secs_f64();
        let cm = confusion(&fold.test_y, &predicted, dataset.n_classes())
            .map_err(|e| annotate(Some(kind), e))?;
        let metrics = MetricsReport::from_confusion(&cm).map_err(|e| annotate(Some(kind), e))?;
        let classifier_converged = match &model {
            ClassifierModel::Svm(m) => m.converged(),
            _ => true,
        };
        cells.push(CellResult {
            dataset: dataset.name.clone(),
            reducer,
            classifier: kind,
            repetition,
            seed,
            original_dim: dataset.n_features(),
            reduced_dim: fitted.output_dim(),
            n_train: fold.train_y.len(),
            n_test: fold.test_y.len(),
            metrics,
            confusion: cm,
            reducer_diagnostics: diagnostics.clone(),
            classifier_converged,
            timings: PhaseTimings {
                reduce_secs,
                train_secs,
                predict_secs,
            },
        });
        models.push(model);
    }
    Ok(UnitOutcome {
        reducer: fitted,
        models,
        cells,
    })
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Runs every (dataset, reducer, classifier, repetition) cell on already
/// loaded datasets. Results come back ordered by dataset, reducer,
/// classifier and repetition, whatever the degree of parallelism.
pub fn run_on_datasets(datasets: &[Dataset], config: &RunConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let units: Vec<(usize, usize, usize)> = (0..datasets.len())
        .flat_map(|d| {
            (0..config.reducers.len())
                .flat_map(move |r| (0..config.repetitions).map(move |rep| (d, r, rep)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let outcomes: Vec<Vec<CellResult>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(d, r, rep)| {
                log::info!(
                    "dataset={} reducer={} repetition={}",
                    datasets[d].name,
                    config.reducers[r].name(),
                    rep
                );
                run_unit(&datasets[d], config.reducers[r], rep, config).map(|o| o.cells)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut keyed: Vec<((usize, usize, usize, usize), CellResult)> = units
        .iter()
        .zip(outcomes)
        .flat_map(|(&(d, r, rep), cells)| {
            cells
                .into_iter()
                .enumerate()
                .map(move |(c, cell)| ((d, r, c, rep), cell))
        })
        .collect();
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed.into_iter().map(|(_, cell)| cell).collect())
}

/// Loads every configured dataset and runs the full pipeline.
pub fn run_pipeline(config: &RunConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let datasets = config.load_datasets()?;
    run_on_datasets(&datasets, config)
}
