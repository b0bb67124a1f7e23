//! Cross-validation folds, recognition metrics and run aggregation.

mod aggregate;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workflow::{ActivityTuple, Dataset, Token, POSITIONS};

pub use aggregate::{aggregate, quantile, GroupKey, SummaryRow};
pub use stats::{spearman_rho, wilcoxon_signed_rank, RankCorrelation, WilcoxonResult, EXACT_MAX_N};

/// One leave-one-intervention-out split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<String>,
    pub test: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// One fold per intervention, ordered by intervention id.
pub fn make_folds(d: &Dataset) -> Result<FoldPlan> {
    if d.interventions.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-out needs at least 2 interventions, `{}` has {}",
            d.name,
            d.interventions.len()
        )));
    }
    let mut ids: Vec<&str> = d.interventions.iter().map(|iv| iv.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Validation(format!("duplicate intervention id `{}`", w[0])));
    }
    let folds = ids
        .iter()
        .enumerate()
        .map(|(index, &test)| Fold {
            index,
            train: ids.iter().filter(|&&id| id != test).map(|s| s.to_string()).collect(),
            test: test.to_owned(),
        })
        .collect();
    Ok(FoldPlan { folds })
}

/// Share of positions whose predicted tuple equals the truth in all six items.
pub fn sequence_accuracy(pred: &[[Token; POSITIONS]], truth: &[ActivityTuple]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), actual: pred.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| **p == t.items).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Time during which the predicted timeline equals the truth, divided by
/// the total truth activity time. Both timelines are lists of tuples over
/// non-overlapping, sorted intervals; overlap is exact interval intersection.
pub fn duration_weighted_accuracy(pred: &[ActivityTuple], truth: &[ActivityTuple]) -> Result<f64> {
    let total: f64 = truth.iter().map(ActivityTuple::duration).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("truth timeline has zero total duration".into()));
    }
    let mut correct = 0.0;
    let mut j = 0;
    for t in truth {
        while j < pred.len() && pred[j].t_end <= t.t_start {
            j += 1;
        }
        let mut k = j;
        while k < pred.len() && pred[k].t_start < t.t_end {
            if pred[k].items == t.items {
                let overlap = pred[k].t_end.min(t.t_end) - pred[k].t_start.max(t.t_start);
                if overlap > 0.0 {
                    correct += overlap;
                }
            }
            k += 1;
        }
    }
    Ok((correct / total).clamp(0.0, 1.0))
}

/// Model-free baseline: the observed tuple itself is the prediction,
/// position by position.
pub fn vis_baseline(observed: &[ActivityTuple], truth: &[ActivityTuple]) -> Result<f64> {
    if observed.len() != truth.len() {
        return Err(Error::Validation(format!(
            "observed ({}) and truth ({}) sequences are not aligned",
            observed.len(),
            truth.len()
        )));
    }
    if observed.iter().zip(truth).any(|(o, t)| o.t_start != t.t_start || o.t_end != t.t_end) {
        return Err(Error::Validation("observed and truth intervals differ".into()));
    }
    let pred: Vec<[Token; POSITIONS]> = observed.iter().map(|a| a.items).collect();
    sequence_accuracy(&pred, truth)
}

/// Timeline variant of [`vis_baseline`] for re-segmented (delayed) observations.
pub fn vis_baseline_timeline(observed: &[ActivityTuple], truth: &[ActivityTuple]) -> Result<f64> {
    duration_weighted_accuracy(observed, truth)
}

/// Experiment outcome for one (dataset, config, condition, fold, run, simulation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub experiment: String,
    pub config: String,
    pub noise_kind: String,
    pub rate: Option<f64>,
    pub delay_s: Option<f64>,
    pub fold: usize,
    pub run: usize,
    pub sim: usize,
    pub accuracy: f64,
    pub unseen_rate: f64,
}
