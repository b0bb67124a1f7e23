//! Element-ablation laboratory for low-level surgical activity recognition.
//!
//! A low-level activity is a 6-tuple holding a verb, an instrument and an
//! anatomical structure for each of the surgeon's hands. This crate asks
//! which of those elements a recognizer actually needs: it generates
//! synthetic interventions, hides tuple positions behind visibility masks,
//! trains a from-scratch LSTM to recover the full tuple from a window of
//! masked history, and measures what happens under label noise and
//! recognition delay.
//!
//! Modules:
//!
//! * [`workflow`]: data model, annotation format, hand merging, masks, window encoding.
//! * [`synthgen`]: synthetic dataset generator and dataset presets.
//! * [`corruption`]: noise models and temporal delay.
//! * [`seqmodel`]: LSTM classifier, Adam, training and gradient checking.
//! * [`evaluation`]: cross-validation folds, accuracy metrics, aggregation, statistics.
//! * [`experiment`]: config-driven experiment runner and report emitter.

pub mod corruption;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod seed;
pub mod seqmodel;
pub mod synthgen;
pub mod workflow;

pub use error::{Error, Result};
