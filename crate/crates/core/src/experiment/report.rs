use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Experiment;
use super::runner::RunReport;
use crate::corruption::NoiseKind;
use crate::error::{Error, Result};
use crate::evaluation::{aggregate, quantile, GroupKey, ResultRecord, SummaryRow};
use crate::workflow::{element_cross_accuracy, Dataset, ElementKind};

pub const RESULTS_HEADER: &str = "dataset,experiment,config,noise_kind,rate,delay_s,fold,run,sim,accuracy,unseen_rate";

const CONDITION: [GroupKey; 4] = [GroupKey::Config, GroupKey::NoiseKind, GroupKey::Rate, GroupKey::Delay];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct SummaryFile {
    pub dataset: String,
    pub experiment: Experiment,
    pub window_n: usize,
    pub duration_feature: bool,
    pub runs_per_fold: usize,
    pub seed: u64,
    pub configurations: Vec<String>,
    pub folds: Vec<String>,
    /// One row per (config, noise kind, rate, delay) over all folds, runs and simulations.
    pub summary: Vec<SummaryRow>,
    /// Mean clean accuracy per config, for experiments that corrupt inputs.
    #[serde(default)]
    pub clean: BTreeMap<String, f64>,
}

/// Mean accuracy per (config, noise kind, rate, delay, fold), averaged over
/// runs and simulations. Keys are the group values of [`aggregate`].
pub fn fold_means(records: &[ResultRecord]) -> Result<Vec<SummaryRow>> {
    let mut keys = CONDITION.to_vec();
    keys.push(GroupKey::Fold);
    aggregate(records, &keys)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(Error::from)
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn write_results(records: &[ResultRecord], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    if records.is_empty() {
        w.write_record(RESULTS_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_boxplot(report: &RunReport, path: &Path) -> Result<()> {
    let means = fold_means(&report.records)?;
    let mut w = writer(path)?;
    w.write_record(["config", "folds", "min", "q25", "median", "q75", "max", "mean"])?;
    for config in &report.configurations {
        let mut xs: Vec<f64> = means.iter().filter(|r| &r.group["config"] == config).map(|r| r.mean).collect();
        if xs.is_empty() {
            continue;
        }
        xs.sort_by(f64::total_cmp);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        w.write_record([
            config.clone(),
            xs.len().to_string(),
            fmt(xs[0]),
            fmt(quantile(&xs, 0.25)),
            fmt(quantile(&xs, 0.5)),
            fmt(quantile(&xs, 0.75)),
            fmt(xs[xs.len() - 1]),
            fmt(mean),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_element_accuracy(d: &Dataset, path: &Path) -> Result<()> {
    let m = element_cross_accuracy(d);
    let mut w = writer(path)?;
    w.write_record(["known", "target", "accuracy"])?;
    for known in ElementKind::ALL {
        for target in ElementKind::ALL {
            if known != target {
                w.write_record([
                    known.to_string(),
                    target.to_string(),
                    fmt(m[known.index()][target.index()]),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn clean_means(report: &RunReport) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for c in &report.clean {
        let e = sums.entry(c.config.clone()).or_default();
        e.0 += c.accuracy;
        e.1 += 1;
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn write_noise(report: &RunReport, summary: &[SummaryRow], dir: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    let clean = clean_means(report);
    for kind in NoiseKind::ALL {
        let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.group["noise_kind"] == kind.as_str()).collect();
        if rows.is_empty() {
            continue;
        }
        let path = dir.join(format!("noise_{kind}.csv"));
        let mut w = writer(&path)?;
        w.write_record(["config", "rate", "accuracy"])?;
        for r in &rows {
            w.write_record([r.group["config"].clone(), r.group["rate"].clone(), fmt(r.mean)])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    let path = dir.join("noise_loss.csv");
    let mut w = writer(&path)?;
    w.write_record(["config", "noise_kind", "rate", "clean_accuracy", "accuracy", "loss"])?;
    for r in summary {
        let config = &r.group["config"];
        let base = clean.get(config).copied().unwrap_or(f64::NAN);
        w.write_record([
            config.clone(),
            r.group["noise_kind"].clone(),
            r.group["rate"].clone(),
            fmt(base),
            fmt(r.mean),
            fmt(base - r.mean),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn write_delay(summary: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["config", "delay_s", "accuracy"])?;
    for r in summary {
        w.write_record([r.group["config"].clone(), r.group["delay_s"].clone(), fmt(r.mean)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `summary.json` and the plot-data CSVs of the
/// experiment into `dir`; returns the written paths. `dataset` enables
/// the element cross-accuracy table for E1.
pub fn write_report(report: &RunReport, dataset: Option<&Dataset>, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();

    let results = dir.join("results.csv");
    write_results(&report.records, &results)?;
    files.push(results);

    let summary = if report.records.is_empty() { Vec::new() } else { aggregate(&report.records, &CONDITION)? };
    let file = SummaryFile {
        dataset: report.dataset.clone(),
        experiment: report.experiment,
        window_n: report.window_n,
        duration_feature: report.duration_feature,
        runs_per_fold: report.runs_per_fold,
        seed: report.seed,
        configurations: report.configurations.clone(),
        folds: report.folds.clone(),
        summary: summary.clone(),
        clean: clean_means(report),
    };
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&file)?).map_err(|e| Error::io(&path, e))?;
    files.push(path);

    if report.records.is_empty() {
        return Ok(files);
    }
    match report.experiment {
        Experiment::OneElement | Experiment::TwoElement | Experiment::Duration => {
            let path = dir.join("boxplot.csv");
            write_boxplot(report, &path)?;
            files.push(path);
            if let (Experiment::OneElement, Some(d)) = (report.experiment, dataset) {
                let path = dir.join("element_accuracy.csv");
                write_element_accuracy(d, &path)?;
                files.push(path);
            }
        }
        Experiment::Noise => write_noise(report, &summary, dir, &mut files)?,
        Experiment::Delay => {
            let path = dir.join("delay.csv");
            write_delay(&summary, &path)?;
            files.push(path);
        }
    }
    Ok(files)
}
