use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{position_kind, Dataset, ElementKind, Hand, Token, POSITIONS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and sample standard deviation (n - 1); sd is 0 for one value.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

/// Dataset summary in the shape of a dataset description table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub interventions: usize,
    pub surgeons: usize,
    pub duration_min: MeanSd,
    pub activities_per_intervention: MeanSd,
    pub unique_activities: usize,
    pub unique_phases: usize,
    pub unique_verbs: usize,
    pub unique_instruments: usize,
    pub unique_structures: usize,
}

/// Computes per-dataset statistics. Unique element counts only include
/// labels that actually occur; reserved tokens are not counted.
pub fn dataset_stats(d: &Dataset) -> Result<DatasetStats> {
    if d.interventions.is_empty() {
        return Err(Error::InvalidArgument(format!("dataset `{}` is empty", d.name)));
    }
    let durations: Vec<f64> = d.interventions.iter().map(|iv| iv.horizon() / 60.0).collect();
    let counts: Vec<f64> = d.interventions.iter().map(|iv| iv.activities.len() as f64).collect();
    let mut tuples = HashSet::new();
    let mut phases = HashSet::new();
    let mut surgeons = HashSet::new();
    let mut elements: [HashSet<Token>; 3] = Default::default();
    for iv in &d.interventions {
        surgeons.insert(iv.surgeon_id.as_str());
        phases.extend(iv.phases.iter().map(|p| p.name.as_str()));
        for a in &iv.activities {
            tuples.insert(a.items);
            for p in 0..POSITIONS {
                if !a.items[p].is_reserved() {
                    elements[position_kind(p).index()].insert(a.items[p]);
                }
            }
        }
    }
    Ok(DatasetStats {
        name: d.name.clone(),
        interventions: d.interventions.len(),
        surgeons: surgeons.len(),
        duration_min: MeanSd::of(&durations),
        activities_per_intervention: MeanSd::of(&counts),
        unique_activities: tuples.len(),
        unique_phases: phases.len(),
        unique_verbs: elements[ElementKind::Verb.index()].len(),
        unique_instruments: elements[ElementKind::Instrument.index()].len(),
        unique_structures: elements[ElementKind::Structure.index()].len(),
    })
}

/// How well one element kind determines another: for every ordered pair
/// (known, target), the share of hand triples whose target label equals the
/// most frequent target label seen with the same known label. Triples with
/// a reserved token in either slot are skipped. Indexed `[known][target]`.
pub fn element_cross_accuracy(d: &Dataset) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for known in ElementKind::ALL {
        for target in ElementKind::ALL {
            let mut table: HashMap<(Token, Token), usize> = HashMap::new();
            let mut total = 0usize;
            for a in d.interventions.iter().flat_map(|iv| &iv.activities) {
                for hand in [Hand::Left, Hand::Right] {
                    let base = hand.index() * 3;
                    let k = a.items[base + known.index()];
                    let t = a.items[base + target.index()];
                    if !k.is_reserved() && !t.is_reserved() {
                        *table.entry((k, t)).or_default() += 1;
                        total += 1;
                    }
                }
            }
            let mut best: HashMap<Token, usize> = HashMap::new();
            for (&(k, _), &n) in &table {
                let b = best.entry(k).or_default();
                *b = (*b).max(n);
            }
            let hits: usize = best.values().sum();
            out[known.index()][target.index()] = if total > 0 { hits as f64 / total as f64 } else { 0.0 };
        }
    }
    out
}
