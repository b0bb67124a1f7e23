use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Experiment;
use super::report::{fold_means, SummaryFile};
use super::runner::RunReport;
use crate::error::{Error, Result};
use crate::evaluation::{spearman_rho, wilcoxon_signed_rank, RankCorrelation, ResultRecord, WilcoxonResult};

/// The parts of a written report needed for comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedReport {
    pub dataset: String,
    pub experiment: Experiment,
    pub configurations: Vec<String>,
    pub folds: Vec<String>,
    pub records: Vec<ResultRecord>,
}

impl From<&RunReport> for LoadedReport {
    fn from(r: &RunReport) -> Self {
        LoadedReport {
            dataset: r.dataset.clone(),
            experiment: r.experiment,
            configurations: r.configurations.clone(),
            folds: r.folds.clone(),
            records: r.records.clone(),
        }
    }
}

/// Reads `summary.json` and `results.csv` from a report directory.
pub fn load_report(dir: &Path) -> Result<LoadedReport> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let summary: SummaryFile = serde_json::from_str(&text)?;
    let path = dir.join("results.csv");
    let mut reader = csv::Reader::from_path(&path)?;
    let records = reader.deserialize().collect::<std::result::Result<Vec<ResultRecord>, _>>()?;
    Ok(LoadedReport {
        dataset: summary.dataset,
        experiment: summary.experiment,
        configurations: summary.configurations,
        folds: summary.folds,
        records,
    })
}

/// Paired test of fold-level accuracies of two configurations (or of the
/// same configuration in two reports) under one test condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub noise_kind: String,
    pub rate: String,
    pub delay_s: String,
    pub folds: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub wilcoxon: WilcoxonResult,
    /// Rank correlation of the two fold-accuracy vectors; absent when one
    /// of them is constant.
    pub spearman: Option<RankCorrelation>,
}

type Condition = (String, String, String);

/// Fold-mean accuracy vectors keyed by (condition, config), folds in index order.
fn fold_vectors(r: &LoadedReport) -> Result<BTreeMap<(Condition, String), Vec<f64>>> {
    let mut out: BTreeMap<(Condition, String), Vec<(usize, f64)>> = BTreeMap::new();
    for row in fold_means(&r.records)? {
        let g = &row.group;
        let cond = (g["noise_kind"].clone(), g["rate"].clone(), g["delay_s"].clone());
        let fold: usize = g["fold"].parse().map_err(|_| Error::Validation("bad fold index".into()))?;
        out.entry((cond, g["config"].clone())).or_default().push((fold, row.mean));
    }
    out.into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|x| x.0);
            if v.iter().enumerate().any(|(i, x)| x.0 != i) || v.len() != r.folds.len() {
                return Err(Error::MismatchedFolds(format!("config {} does not cover every fold", k.1)));
            }
            Ok((k, v.into_iter().map(|x| x.1).collect()))
        })
        .collect()
}

fn compare_vectors(a: &str, b: &str, cond: &Condition, x: &[f64], y: &[f64]) -> Result<Comparison> {
    let n = x.len() as f64;
    Ok(Comparison {
        a: a.to_owned(),
        b: b.to_owned(),
        noise_kind: cond.0.clone(),
        rate: cond.1.clone(),
        delay_s: cond.2.clone(),
        folds: x.len(),
        mean_a: x.iter().sum::<f64>() / n,
        mean_b: y.iter().sum::<f64>() / n,
        wilcoxon: wilcoxon_signed_rank(x, y)?,
        spearman: spearman_rho(x, y).ok(),
    })
}

/// Pairs every configuration of `a` with the same configuration and test
/// condition in `b`, fold by fold. Both reports must come from the same
/// dataset and fold plan.
pub fn compare_reports(a: &LoadedReport, b: &LoadedReport) -> Result<Vec<Comparison>> {
    if a.dataset != b.dataset {
        return Err(Error::MismatchedFolds(format!("datasets differ: `{}` vs `{}`", a.dataset, b.dataset)));
    }
    if a.folds != b.folds {
        return Err(Error::MismatchedFolds(format!(
            "fold plans differ ({} vs {} folds)",
            a.folds.len(),
            b.folds.len()
        )));
    }
    let va = fold_vectors(a)?;
    let vb = fold_vectors(b)?;
    let mut out = Vec::new();
    for ((cond, config), x) in &va {
        if let Some(y) = vb.get(&(cond.clone(), config.clone())) {
            let label_a = format!("{}:{config}", a.experiment);
            let label_b = format!("{}:{config}", b.experiment);
            out.push(compare_vectors(&label_a, &label_b, cond, x, y)?);
        }
    }
    if out.is_empty() {
        return Err(Error::MismatchedFolds("the reports share no configuration".into()));
    }
    Ok(out)
}

/// Every pair of configurations within one report, per test condition,
/// in configuration order.
pub fn compare_configs(r: &LoadedReport) -> Result<Vec<Comparison>> {
    let vectors = fold_vectors(r)?;
    let mut conditions: Vec<&Condition> = vectors.keys().map(|(c, _)| c).collect();
    conditions.dedup();
    let mut out = Vec::new();
    for cond in conditions {
        for (i, a) in r.configurations.iter().enumerate() {
            for b in &r.configurations[i + 1..] {
                let (Some(x), Some(y)) =
                    (vectors.get(&(cond.clone(), a.clone())), vectors.get(&(cond.clone(), b.clone())))
                else {
                    continue;
                };
                out.push(compare_vectors(a, b, cond, x, y)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("the report has fewer than two configurations".into()));
    }
    Ok(out)
}
