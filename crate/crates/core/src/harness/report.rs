//! Output files of a run.
//!
//! * `results.csv`: one row per cell with the three scores. Contains no
//!   timings, so two runs with the same config are byte-identical.
//! * `summary.csv`: one row per (reducer, dataset); each classifier gets an
//!   F-measure and a G-mean column holding `mean±std` over repetitions.
//! * `accuracy_plotdata.csv`: mean accuracy per (reducer, dataset) and
//!   classifier, ready for a grouped bar chart.
//! * `report.json`: config echo, metric definitions and every cell,
//!   timings included.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{CellResult, ReducerKind, RunConfig};
use crate::classifiers::ClassifierKind;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportFiles {
    pub results_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub accuracy_plotdata_csv: PathBuf,
    pub report_json: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            results_csv: dir.join("results.csv"),
            summary_csv: dir.join("summary.csv"),
            accuracy_plotdata_csv: dir.join("accuracy_plotdata.csv"),
            report_json: dir.join("report.json"),
        }
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

type GroupKey = (ReducerKind, String);
type MetricColumn = (&'static str, fn(&CellResult) -> f64);

/// Cells grouped by (reducer, dataset), then classifier. Datasets keep the
/// order in which they first appear.
struct Groups<'a> {
    keys: Vec<GroupKey>,
    cells: BTreeMap<(usize, ClassifierKind), Vec<&'a CellResult>>,
}

fn group(results: &[CellResult]) -> Groups<'_> {
    let mut datasets: Vec<&str> = Vec::new();
    for cell in results {
        if !datasets.contains(&cell.dataset.as_str()) {
            datasets.push(&cell.dataset);
        }
    }
    let mut reducers: Vec<ReducerKind> = results.iter().map(|c| c.reducer).collect();
    reducers.sort();
    reducers.dedup();
    let keys: Vec<GroupKey> = reducers
        .iter()
        .flat_map(|&r| datasets.iter().map(move |d| (r, d.to_string())))
        .collect();

    let mut cells: BTreeMap<(usize, ClassifierKind), Vec<&CellResult>> = BTreeMap::new();
    for cell in results {
        let g = keys
            .iter()
            .position(|(r, d)| *r == cell.reducer && *d == cell.dataset)
            .expect("every cell has a group");
        cells.entry((g, cell.classifier)).or_default().push(cell);
    }
    Groups { keys, cells }
}

fn classifiers_present(results: &[CellResult]) -> Vec<ClassifierKind> {
    let mut kinds: Vec<ClassifierKind> = results.iter().map(|c| c.classifier).collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn write_results(path: &Path, results: &[CellResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "dataset",
        "reducer",
        "classifier",
        "seed",
        "accuracy",
        "f_measure",
        "g_mean",
    ])?;
    for c in results {
        w.write_record([
            c.dataset.clone(),
            c.reducer.name().to_string(),
            c.classifier.name().to_string(),
            c.seed.to_string(),
            c.metrics.accuracy.to_string(),
            c.metrics.f_measure.to_string(),
            c.metrics.g_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn summary_cell(cells: Option<&Vec<&CellResult>>, metric: fn(&CellResult) -> f64) -> String {
    match cells {
        Some(cells) => {
            let values: Vec<f64> = cells.iter().map(|c| metric(c)).collect();
            let (mean, std) = mean_std(&values);
            format!("{mean:.4}±{std:.4}")
        }
        None => String::new(),
    }
}

fn write_summary(path: &Path, results: &[CellResult]) -> Result<()> {
    let groups = group(results);
    let kinds = classifiers_present(results);
    let metrics: [MetricColumn; 2] = [
        ("f_measure", |c| c.metrics.f_measure),
        ("g_mean", |c| c.metrics.g_mean),
    ];

    let mut w = csv_writer(path)?;
    let mut header = vec!["reducer".to_string(), "dataset".to_string()];
    for (metric, _) in &metrics {
        header.extend(kinds.iter().map(|k| format!("{}_{metric}", k.name())));
    }
    w.write_record(&header)?;
    for (g, (reducer, dataset)) in groups.keys.iter().enumerate() {
        let mut row = vec![reducer.name().to_string(), dataset.clone()];
        for (_, metric) in &metrics {
            row.extend(
                kinds
                    .iter()
                    .map(|&k| summary_cell(groups.cells.get(&(g, k)), *metric)),
            );
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_plotdata(path: &Path, results: &[CellResult]) -> Result<()> {
    let groups = group(results);
    let kinds = classifiers_present(results);
    let mut w = csv_writer(path)?;
    let mut header = vec!["reducer".to_string(), "dataset".to_string()];
    header.extend(kinds.iter().map(|k| k.name().to_string()));
    w.write_record(&header)?;
    for (g, (reducer, dataset)) in groups.keys.iter().enumerate() {
        let mut row = vec![reducer.name().to_string(), dataset.clone()];
        for &k in &kinds {
            row.push(match groups.cells.get(&(g, k)) {
                Some(cells) => {
                    let acc: Vec<f64> = cells.iter().map(|c| c.metrics.accuracy).collect();
                    format!("{:.6}", mean_std(&acc).0)
                }
                None => String::new(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    format: &'static str,
    version: u32,
    config: &'a RunConfig,
    metric_definitions: BTreeMap<&'static str, &'static str>,
    notes: Vec<&'static str>,
    cells: &'a [CellResult],
}

fn write_json(path: &Path, results: &[CellResult], config: &RunConfig) -> Result<()> {
    let metric_definitions = BTreeMap::from([
        ("accuracy", "correct predictions / test samples"),
        (
            "f_measure",
            "unweighted mean over classes of 2PR/(P+R); a class with P = R = 0 scores 0",
        ),
        (
            "g_mean",
            "geometric mean of per-class recall over classes present in the test fold",
        ),
    ]);
    let notes = vec![
        "reducer \"none\" classifies the scaled features directly and serves as a reference",
        "summary.csv entries are mean±sample standard deviation over repetitions",
    ];
    let report = JsonReport {
        format: "reducebench-report",
        version: 1,
        config,
        metric_definitions,
        notes,
        cells: results,
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes the four report files into `out_dir`, creating it if needed.
/// Nothing is written when `results` is empty.
pub fn emit_reports(
    results: &[CellResult],
    config: &RunConfig,
    out_dir: &Path,
) -> Result<ReportFiles> {
    if results.is_empty() {
        return Err(Error::InvalidConfig("no results to report".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let files = ReportFiles::in_dir(out_dir);
    write_results(&files.results_csv, results)?;
    write_summary(&files.summary_csv, results)?;
    write_plotdata(&files.accuracy_plotdata_csv, results)?;
    write_json(&files.report_json, results, config)?;
    Ok(files)
}
