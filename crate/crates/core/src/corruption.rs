//! Observation noise and recognition delay.
//!
//! Noise is applied per tuple position: a fixed share of the occurrences
//! at each of the six positions is selected without replacement and
//! relabelled according to one of four models. Delay shifts every visible
//! position's label timeline later in time and re-segments the result.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::workflow::{
    position_kind, segment_tracks, ActivityTuple, Dataset, Intervention, MaskConfig, Token, Track,
    Vocabulary, POSITIONS,
};

const TAG_SIMULATION: u64 = 0x5349_4d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Uniform,
    Frequency,
    Pairwise,
    #[serde(rename = "nosignal")]
    NoSignal,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] =
        [NoiseKind::Uniform, NoiseKind::Frequency, NoiseKind::Pairwise, NoiseKind::NoSignal];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Uniform => "uniform",
            NoiseKind::Frequency => "frequency",
            NoiseKind::Pairwise => "pairwise",
            NoiseKind::NoSignal => "nosignal",
        }
    }

    pub fn needs_frequency_table(self) -> bool {
        matches!(self, NoiseKind::Frequency | NoiseKind::Pairwise)
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "uniform" => Ok(NoiseKind::Uniform),
            "frequency" => Ok(NoiseKind::Frequency),
            "pairwise" => Ok(NoiseKind::Pairwise),
            "nosignal" => Ok(NoiseKind::NoSignal),
            _ => Err(Error::InvalidArgument(format!("unknown noise kind `{s}`"))),
        }
    }
}

fn default_repetitions() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, rate: f64, seed: u64) -> Self {
        NoiseSpec { kind, rate, repetitions: default_repetitions(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::InvalidArgument(format!("noise rate {} is outside [0, 1]", self.rate)));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("noise repetitions must be at least 1".into()));
        }
        Ok(())
    }

    /// The spec for simulation `sim` (0-based), with its own derived seed.
    pub fn simulation(&self, sim: usize) -> NoiseSpec {
        NoiseSpec { seed: seed::derive(self.seed, &[TAG_SIMULATION, sim as u64]), ..*self }
    }
}

/// Number of occurrences to corrupt: `rate * len` rounded half-up.
pub fn selection_count(rate: f64, len: usize) -> usize {
    ((rate * len as f64) + 0.5).floor().min(len as f64) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub delay_s: f64,
    /// Optional per-position delays (lv, li, ls, rv, ri, rs); `delay_s` applies when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_position: Option<[f64; POSITIONS]>,
}

impl DelaySpec {
    pub fn new(delay_s: f64) -> Self {
        DelaySpec { delay_s, per_position: None }
    }

    pub fn delays(&self) -> [f64; POSITIONS] {
        self.per_position.unwrap_or([self.delay_s; POSITIONS])
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays().iter().all(|d| d.is_finite() && *d >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid delay {:?}", self.delays())))
        }
    }
}

/// Duration mass of every token at every position, over a whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    /// `mass[p][token]` in seconds; reserved tokens included.
    pub mass: Vec<Vec<f64>>,
}

impl FrequencyTable {
    pub fn probability(&self, p: usize, t: Token) -> f64 {
        let total: f64 = self.mass[p].iter().sum();
        if total > 0.0 {
            self.mass[p].get(t.index()).copied().unwrap_or(0.0) / total
        } else {
            0.0
        }
    }

    /// The two data labels with the largest mass at position `p`.
    pub fn top_pair(&self, p: usize) -> Option<(Token, Token)> {
        let mut labels: Vec<(usize, f64)> = self.mass[p]
            .iter()
            .copied()
            .enumerate()
            .skip(Token::RESERVED as usize)
            .filter(|&(_, m)| m > 0.0)
            .collect();
        labels.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        match labels.as_slice() {
            [a, b, ..] => Some((Token(a.0 as u32), Token(b.0 as u32))),
            _ => None,
        }
    }
}

pub fn build_frequency_table(d: &Dataset) -> FrequencyTable {
    let mut mass: Vec<Vec<f64>> = (0..POSITIONS).map(|p| vec![0.0; d.vocab.position(p).width()]).collect();
    for iv in &d.interventions {
        for a in &iv.activities {
            for p in 0..POSITIONS {
                mass[p][a.items[p].index()] += a.duration();
            }
        }
    }
    FrequencyTable { mass }
}

/// Applies one noise simulation to a tuple sequence.
///
/// Every position is corrupted independently with its own random stream.
/// Replacement labels never equal the original under uniform and
/// frequency noise. Pairwise noise only relabels selected occurrences of
/// the position's top-2 labels and skips the rest.
pub fn corrupt(
    seq: &[ActivityTuple],
    spec: &NoiseSpec,
    freq: Option<&FrequencyTable>,
    vocab: &Vocabulary,
) -> Result<Vec<ActivityTuple>> {
    spec.validate()?;
    if spec.kind.needs_frequency_table() && freq.is_none() {
        return Err(Error::InvalidArgument(format!("{} noise requires a frequency table", spec.kind)));
    }
    let mut out = seq.to_vec();
    let k = selection_count(spec.rate, seq.len());
    if k == 0 {
        return Ok(out);
    }
    for p in 0..POSITIONS {
        let kind_vocab = vocab.position(p);
        if matches!(spec.kind, NoiseKind::Uniform | NoiseKind::Frequency) && kind_vocab.n_labels() < 2 {
            return Err(Error::InvalidArgument(format!(
                "{} vocabulary has fewer than two labels; no replacement exists",
                position_kind(p)
            )));
        }
        let mut rng = seed::rng(spec.seed, &[p as u64]);
        let picked = index::sample(&mut rng, seq.len(), k);
        let pair = match spec.kind {
            NoiseKind::Pairwise => freq.and_then(|f| f.top_pair(p)),
            _ => None,
        };
        for i in picked.iter() {
            let current = out[i].items[p];
            let replacement = match spec.kind {
                NoiseKind::NoSignal => Token::NONE,
                NoiseKind::Uniform => {
                    let n = kind_vocab.n_labels() as u32;
                    let candidates = if current.is_reserved() { n } else { n - 1 };
                    let mut t = Token(Token::RESERVED + rng.random_range(0..candidates));
                    if !current.is_reserved() && t >= current {
                        t = Token(t.0 + 1);
                    }
                    t
                }
                NoiseKind::Frequency => {
                    let mass = &freq.unwrap().mass[p];
                    draw_excluding(&mut rng, mass, current).ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "no alternative label with positive frequency at {}",
                            crate::workflow::position_name(p)
                        ))
                    })?
                }
                NoiseKind::Pairwise => match pair {
                    Some((a, b)) if current == a => b,
                    Some((a, b)) if current == b => a,
                    _ => current,
                },
            };
            out[i].items[p] = replacement;
        }
    }
    Ok(out)
}

/// Draws a data label proportional to `mass`, excluding `current`.
fn draw_excluding(rng: &mut seed::Rng, mass: &[f64], current: Token) -> Option<Token> {
    let weight = |k: usize| if k == current.index() { 0.0 } else { mass[k] };
    let lo = Token::RESERVED as usize;
    let total: f64 = (lo..mass.len()).map(weight).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for k in lo..mass.len() {
        let w = weight(k);
        if w <= 0.0 {
            continue;
        }
        last = Some(Token(k as u32));
        if u < w {
            return last;
        }
        u -= w;
    }
    last
}

/// Observed tuple sequence when every visible position is reported late.
///
/// Each visible position's label timeline (`none` outside activities) is
/// shifted by its delay; hidden positions read `unknown`. The shifted
/// timelines are re-segmented at every change point, so the horizon grows
/// by the delay and activities may be split, merged or reordered.
/// Segments where nothing but reserved tokens is observed are dropped.
pub fn apply_delay(iv: &Intervention, spec: &DelaySpec, m: &MaskConfig) -> Vec<ActivityTuple> {
    let delays = spec.delays();
    let tracks: [Track; POSITIONS] = std::array::from_fn(|p| {
        if !m.is_visible(p) {
            return Track::empty(Token::UNKNOWN);
        }
        let d = delays[p];
        let mut segments: Vec<(f64, f64, Token)> = Vec::with_capacity(iv.activities.len());
        for a in &iv.activities {
            let tok = a.items[p];
            let (s, e) = (a.t_start + d, a.t_end + d);
            match segments.last_mut() {
                Some(last) if last.2 == tok && last.1 == s => last.1 = e,
                _ => segments.push((s, e, tok)),
            }
        }
        segments.retain(|s| s.2 != Token::NONE);
        Track { fill: Token::NONE, segments }
    });
    if !m.visible().iter().any(|&v| v) {
        // nothing observable: keep the activity boundaries with all-unknown tuples
        return iv
            .activities
            .iter()
            .map(|a| ActivityTuple::new([Token::UNKNOWN; POSITIONS], a.t_start, a.t_end))
            .collect();
    }
    segment_tracks(&tracks)
}
