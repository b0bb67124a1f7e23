//! Surgical process data model.
//!
//! An [`Intervention`] is a temporally ordered list of [`ActivityTuple`]s.
//! Each tuple has six positions, `{left, right} x {verb, instrument,
//! structure}`, stored as [`Token`]s that index into a dataset-wide
//! [`Vocabulary`]. Two tokens are reserved in every kind: [`Token::UNKNOWN`]
//! marks a position hidden by a [`MaskConfig`], [`Token::NONE`] marks a
//! position with no signal (an idle hand, or a dropped sensor reading).

mod encode;
mod format;
mod mask;
mod merge;
mod stats;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{encode_tuple, encode_window, feature_dim, EncodedSequence};
pub use format::{
    load_dataset, parse_annotations, save_dataset, write_annotations, AnnotationFile, Manifest,
    ManifestEntry,
};
pub use mask::{apply_mask, MaskConfig};
pub use merge::{merge_hands, segment_tracks, Track};
pub use stats::{dataset_stats, element_cross_accuracy, DatasetStats, MeanSd};

/// Number of tuple positions.
pub const POSITIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Verb,
    Instrument,
    Structure,
}

impl ElementKind {
    pub const ALL: [ElementKind; 3] = [ElementKind::Verb, ElementKind::Instrument, ElementKind::Structure];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            ElementKind::Verb => 'V',
            ElementKind::Instrument => 'I',
            ElementKind::Structure => 'S',
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementKind::Verb => "verb",
            ElementKind::Instrument => "instrument",
            ElementKind::Structure => "structure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Kind of tuple position `p` (0..6, ordered lv, li, ls, rv, ri, rs).
pub fn position_kind(p: usize) -> ElementKind {
    ElementKind::ALL[p % 3]
}

pub fn position_hand(p: usize) -> Hand {
    if p < 3 {
        Hand::Left
    } else {
        Hand::Right
    }
}

pub fn position_name(p: usize) -> &'static str {
    ["lv", "li", "ls", "rv", "ri", "rs"][p]
}

/// Index of a label inside its kind's vocabulary. Data labels start at 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token(pub u32);

impl Token {
    pub const UNKNOWN: Token = Token(0);
    pub const NONE: Token = Token(1);
    pub const RESERVED: u32 = 2;

    pub fn is_reserved(self) -> bool {
        self.0 < Self::RESERVED
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub const UNKNOWN_LABEL: &str = "unknown";
pub const NONE_LABEL: &str = "none";

/// Labels of one element kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct KindVocab {
    labels: Vec<String>,
    index: HashMap<String, Token>,
}

impl From<Vec<String>> for KindVocab {
    fn from(labels: Vec<String>) -> Self {
        let mut v = KindVocab::default();
        for l in labels {
            // duplicates and reserved words are dropped silently on deserialize
            let _ = v.intern(&l);
        }
        v
    }
}

impl From<KindVocab> for Vec<String> {
    fn from(v: KindVocab) -> Self {
        v.labels
    }
}

impl KindVocab {
    /// Returns the token for `label`, adding it if new.
    pub fn intern(&mut self, label: &str) -> Result<Token> {
        if label == UNKNOWN_LABEL || label == NONE_LABEL {
            return Err(Error::Validation(format!("label `{label}` is a reserved token")));
        }
        if let Some(&t) = self.index.get(label) {
            return Ok(t);
        }
        let t = Token(self.labels.len() as u32 + Token::RESERVED);
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), t);
        Ok(t)
    }

    pub fn get(&self, label: &str) -> Option<Token> {
        match label {
            UNKNOWN_LABEL => Some(Token::UNKNOWN),
            NONE_LABEL => Some(Token::NONE),
            _ => self.index.get(label).copied(),
        }
    }

    pub fn label(&self, t: Token) -> &str {
        match t {
            Token::UNKNOWN => UNKNOWN_LABEL,
            Token::NONE => NONE_LABEL,
            Token(i) => &self.labels[(i - Token::RESERVED) as usize],
        }
    }

    /// Number of data labels, reserved tokens excluded.
    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    /// One-hot block width: data labels plus the two reserved tokens.
    pub fn width(&self) -> usize {
        self.labels.len() + Token::RESERVED as usize
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Data-label tokens in index order.
    pub fn data_tokens(&self) -> impl Iterator<Item = Token> {
        (Token::RESERVED..Token::RESERVED + self.labels.len() as u32).map(Token)
    }
}

/// Per-kind label sets shared by every intervention of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub verbs: KindVocab,
    pub instruments: KindVocab,
    pub structures: KindVocab,
}

impl Vocabulary {
    pub fn kind(&self, k: ElementKind) -> &KindVocab {
        match k {
            ElementKind::Verb => &self.verbs,
            ElementKind::Instrument => &self.instruments,
            ElementKind::Structure => &self.structures,
        }
    }

    pub fn kind_mut(&mut self, k: ElementKind) -> &mut KindVocab {
        match k {
            ElementKind::Verb => &mut self.verbs,
            ElementKind::Instrument => &mut self.instruments,
            ElementKind::Structure => &mut self.structures,
        }
    }

    pub fn position(&self, p: usize) -> &KindVocab {
        self.kind(position_kind(p))
    }

    pub fn label(&self, p: usize, t: Token) -> &str {
        self.position(p).label(t)
    }

    /// Renders a 6-tuple as `(lv, li, ls, rv, ri, rs)`.
    pub fn render(&self, items: &[Token; POSITIONS]) -> String {
        let parts: Vec<&str> = (0..POSITIONS).map(|p| self.label(p, items[p])).collect();
        format!("({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandAnnotation {
    pub actor: String,
    pub hand: Hand,
    pub verb: String,
    pub instrument: String,
    pub structure: String,
    pub t_start: f64,
    pub t_end: f64,
}

impl HandAnnotation {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_start < 0.0 {
            return Err(Error::Validation(format!(
                "bad interval [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.t_end <= self.t_start {
            return Err(Error::Validation(format!(
                "t_end {} must exceed t_start {}",
                self.t_end, self.t_start
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub t_start: f64,
    pub t_end: f64,
}

/// One low-level activity: six element tokens over a time interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityTuple {
    pub items: [Token; POSITIONS],
    pub t_start: f64,
    pub t_end: f64,
}

impl ActivityTuple {
    pub fn new(items: [Token; POSITIONS], t_start: f64, t_end: f64) -> Self {
        ActivityTuple { items, t_start, t_end }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn hand(&self, hand: Hand) -> [Token; 3] {
        let o = hand.index() * 3;
        [self.items[o], self.items[o + 1], self.items[o + 2]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub id: String,
    pub site: String,
    pub surgeon_id: String,
    pub phases: Vec<Phase>,
    pub activities: Vec<ActivityTuple>,
}

impl Intervention {
    /// Checks ordering, positive durations, non-overlap and that abutting
    /// neighbours differ.
    pub fn validate(&self) -> Result<()> {
        for (k, a) in self.activities.iter().enumerate() {
            if !(a.duration() > 0.0) {
                return Err(Error::Validation(format!(
                    "{}: activity {k} has non-positive duration",
                    self.id
                )));
            }
        }
        for (k, w) in self.activities.windows(2).enumerate() {
            if w[1].t_start < w[0].t_end {
                return Err(Error::Validation(format!(
                    "{}: activities {k} and {} overlap or are out of order",
                    self.id,
                    k + 1
                )));
            }
            if w[1].t_start == w[0].t_end && w[1].items == w[0].items {
                return Err(Error::Validation(format!(
                    "{}: activities {k} and {} are identical neighbours",
                    self.id,
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// End of the last activity, or 0 for an empty intervention.
    pub fn horizon(&self) -> f64 {
        self.activities.last().map_or(0.0, |a| a.t_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub interventions: Vec<Intervention>,
    pub vocab: Vocabulary,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for iv in &self.interventions {
            iv.validate()?;
            for a in &iv.activities {
                for p in 0..POSITIONS {
                    if a.items[p].index() >= self.vocab.position(p).width() {
                        return Err(Error::Validation(format!(
                            "{}: token {} at position {} is outside the vocabulary",
                            iv.id,
                            a.items[p].0,
                            position_name(p)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn intervention(&self, id: &str) -> Option<&Intervention> {
        self.interventions.iter().find(|iv| iv.id == id)
    }
}
