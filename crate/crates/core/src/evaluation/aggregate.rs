use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ResultRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Dataset,
    Experiment,
    Config,
    NoiseKind,
    Rate,
    Delay,
    Fold,
    Run,
    Sim,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Dataset => "dataset",
            GroupKey::Experiment => "experiment",
            GroupKey::Config => "config",
            GroupKey::NoiseKind => "noise_kind",
            GroupKey::Rate => "rate",
            GroupKey::Delay => "delay_s",
            GroupKey::Fold => "fold",
            GroupKey::Run => "run",
            GroupKey::Sim => "sim",
        }
    }

    pub fn value(self, r: &ResultRecord) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        match self {
            GroupKey::Dataset => r.dataset.clone(),
            GroupKey::Experiment => r.experiment.clone(),
            GroupKey::Config => r.config.clone(),
            GroupKey::NoiseKind => r.noise_kind.clone(),
            GroupKey::Rate => opt(r.rate),
            GroupKey::Delay => opt(r.delay_s),
            GroupKey::Fold => r.fold.to_string(),
            GroupKey::Run => r.run.to_string(),
            GroupKey::Sim => r.sim.to_string(),
        }
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dataset" => GroupKey::Dataset,
            "experiment" => GroupKey::Experiment,
            "config" => GroupKey::Config,
            "noise_kind" => GroupKey::NoiseKind,
            "rate" => GroupKey::Rate,
            "delay" | "delay_s" => GroupKey::Delay,
            "fold" => GroupKey::Fold,
            "run" => GroupKey::Run,
            "sim" => GroupKey::Sim,
            _ => return Err(Error::InvalidArgument(format!("unknown group key `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: BTreeMap<String, String>,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub unseen_rate: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn compare_values(a: &[String], b: &[String]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(u), Ok(v)) => u.total_cmp(&v),
            _ => x.cmp(y),
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

/// Summary statistics of `accuracy` per group, groups sorted by key values.
pub fn aggregate(records: &[ResultRecord], keys: &[GroupKey]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("nothing to aggregate".into()));
    }
    let mut groups: Vec<(Vec<String>, Vec<&ResultRecord>)> = Vec::new();
    let mut index: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for r in records {
        let vals: Vec<String> = keys.iter().map(|k| k.value(r)).collect();
        let slot = *index.entry(vals.clone()).or_insert_with(|| {
            groups.push((vals, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(r);
    }
    groups.sort_by(|a, b| compare_values(&a.0, &b.0));
    Ok(groups
        .into_iter()
        .map(|(vals, rs)| {
            let mut xs: Vec<f64> = rs.iter().map(|r| r.accuracy).collect();
            xs.sort_by(f64::total_cmp);
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                group: keys.iter().map(|k| k.name().to_owned()).zip(vals).collect(),
                n,
                mean,
                sd,
                min: xs[0],
                max: xs[n - 1],
                median: quantile(&xs, 0.5),
                q25: quantile(&xs, 0.25),
                q75: quantile(&xs, 0.75),
                unseen_rate: rs.iter().map(|r| r.unseen_rate).sum::<f64>() / n as f64,
            }
        })
        .collect())
}
