//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on a runtime failure (one JSON error line on
//! stderr), 2 on a usage error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ndarray::ArrayView2;
use serde::Serialize;

use super::{emit_reports, fit_reducer, prepare_fold, run_pipeline, ReducerKind, RunConfig};
use crate::classifiers::{ClassifierConfig, ClassifierKind, ClassifierModel};
use crate::dataset::{load_csv, CsvSchema, Dataset, Delimiter, LabelColumn};
use crate::error::{Error, Result};
use crate::metrics::{confusion, MetricsReport};

#[derive(Debug, Parser)]
#[command(
    name = "reducebench",
    version,
    about = "Reduce datasets to half width and benchmark classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every dataset × reducer × classifier × repetition cell.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir, then ./results.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides base_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Write the scaled, reduced train and test partitions of one split.
    Reduce {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reducer: ReducerKind,
        #[arg(long, default_value = "reduced")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train classifiers on one CSV file and score them on another.
    Evaluate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "knn,enn,svm")]
        classifiers: Vec<ClassifierKind>,
        /// Neighbor count for KNN and ENN.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// SVM box constraint.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// SVM KKT tolerance.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Files have no header row.
        #[arg(long)]
        no_header: bool,
        /// Also write the metrics JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let line = serde_json::json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{line}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            repetitions,
        } => {
            let mut config = RunConfig::from_file(&config)?;
            if let Some(seed) = seed {
                config.base_seed = seed;
            }
            if let Some(reps) = repetitions {
                config.repetitions = reps;
            }
            let out = out
                .or_else(|| config.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            let results = run_pipeline(&config)?;
            let files = emit_reports(&results, &config, &out)?;
            let unconverged = results.iter().filter(|c| !c.classifier_converged).count();
            if unconverged > 0 {
                log::warn!("{unconverged} SVM cells hit the iteration cap");
            }
            println!(
                "{} cells written to {}",
                results.len(),
                files
                    .results_csv
                    .parent()
                    .unwrap_or(Path::new("."))
                    .display()
            );
            Ok(())
        }
        Command::Reduce {
            config,
            reducer,
            out,
            seed,
        } => {
            let config = RunConfig::from_file(&config)?;
            config.validate()?;
            let seed = seed.unwrap_or(config.base_seed);
            std::fs::create_dir_all(&out)?;
            for dataset in config.load_datasets()? {
                let fold = prepare_fold(&dataset, &config, seed)?;
                let fitted =
                    fit_reducer(reducer, fold.train_x.view(), &fold.train_y, &config, seed)?;
                let stem = format!("{}_{}", dataset.name, reducer.name());
                let train = fitted.transform(fold.train_x.view())?;
                let test = fitted.transform(fold.test_x.view())?;
                write_labelled(
                    &out.join(format!("{stem}_train.csv")),
                    train.view(),
                    &dataset,
                    &fold.train_y,
                )?;
                write_labelled(
                    &out.join(format!("{stem}_test.csv")),
                    test.view(),
                    &dataset,
                    &fold.test_y,
                )?;
                println!(
                    "{}: {} -> {} features",
                    dataset.name,
                    dataset.n_features(),
                    fitted.output_dim()
                );
            }
            Ok(())
        }
        Command::Evaluate {
            train,
            test,
            classifiers,
            k,
            c,
            tol,
            no_header,
            out,
        } => {
            let schema = CsvSchema {
                label_column: LabelColumn::Last,
                has_header: !no_header,
                delimiter: Delimiter::Comma,
            };
            let train = load_csv(&train, &schema)?;
            let test = load_csv(&test, &schema)?.remap_to(&train.class_names)?;
            let mut cfg = ClassifierConfig {
                knn_k: k,
                enn_k: k,
                ..ClassifierConfig::default()
            };
            cfg.svm.c = c;
            cfg.svm.tol = tol;
            cfg.svm.validate()?;
            let report = evaluate(&train, &test, &classifiers, &cfg)?;
            let text = serde_json::to_string_pretty(&report)?;
            println!("{text}");
            if let Some(out) = out {
                let mut f = std::fs::File::create(out)?;
                writeln!(f, "{text}")?;
            }
            Ok(())
        }
        Command::ValidateConfig { config } => {
            let config = RunConfig::from_file(&config)?;
            config.validate()?;
            for entry in &config.datasets {
                let ds = entry.load()?;
                println!(
                    "{}: {} samples, {} features, {} classes",
                    ds.name,
                    ds.n_samples(),
                    ds.n_features(),
                    ds.n_classes()
                );
            }
            println!("config ok");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct EvaluationEntry {
    classifier: ClassifierKind,
    #[serde(flatten)]
    metrics: MetricsReport,
}

fn evaluate(
    train: &Dataset,
    test: &Dataset,
    classifiers: &[ClassifierKind],
    cfg: &ClassifierConfig,
) -> Result<Vec<EvaluationEntry>> {
    if classifiers.is_empty() {
        return Err(Error::InvalidConfig("no classifiers selected".into()));
    }
    classifiers
        .iter()
        .map(|&kind| {
            let model = ClassifierModel::fit(
                kind,
                cfg,
                train.features.view(),
                &train.labels,
                train.n_classes(),
            )?;
            let predicted = model.predict_rows(test.features.view())?;
            let cm = confusion(&test.labels, &predicted, train.n_classes())?;
            Ok(EvaluationEntry {
                classifier: kind,
                metrics: MetricsReport::from_confusion(&cm)?,
            })
        })
        .collect()
}

/// Features `f0..` plus a trailing `label` column holding class names.
fn write_labelled(
    path: &Path,
    x: ArrayView2<'_, f64>,
    dataset: &Dataset,
    labels: &[usize],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..x.ncols()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, &label) in x.rows().into_iter().zip(labels) {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        record.push(dataset.class_names[label].clone());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
