//! Experiment orchestration: leave-one-intervention-out training and
//! scoring for the five experiments, report files and report comparison.
//!
//! | experiment | inputs at test time                  | score                     |
//! |------------|--------------------------------------|---------------------------|
//! | E1, E2     | clean, masked                        | sequence accuracy         |
//! | E3         | clean, masked, with durations        | sequence accuracy         |
//! | E4         | corrupted (noise list x simulations) | sequence accuracy         |
//! | E5         | delayed and re-segmented             | duration-weighted accuracy |
//!
//! E4 and E5 also score a model-free VIS baseline on the same inputs.

mod compare;
mod config;
mod pipeline;
mod report;
mod runner;

pub use compare::{compare_configs, compare_reports, load_report, Comparison, LoadedReport};
pub use config::{Experiment, ExperimentConfig, GeneratorOverrides, ModelOverrides};
pub use pipeline::{train_model, Score, TrainedModel};
pub use report::{fold_means, write_report, RESULTS_HEADER};
pub use runner::{model_path, run, run_on, training_seed, CleanScore, RunReport};
