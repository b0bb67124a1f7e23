use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use super::pipeline::{train_model, TrainedModel};
use crate::corruption::{apply_delay, build_frequency_table, corrupt, FrequencyTable, NoiseSpec};
use crate::error::{Error, Result};
use crate::evaluation::{make_folds, vis_baseline, vis_baseline_timeline, Fold, ResultRecord};
use crate::seed;
use crate::seqmodel::ModelConfig;
use crate::workflow::{Dataset, Intervention, MaskConfig};

const TAG_TRAIN: u64 = 0x5452_4149_4e;
const TAG_NOISE: u64 = 0x4e4f_4953_45;

/// Accuracy on the uncorrupted test sequence, kept for loss curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanScore {
    pub config: String,
    pub fold: usize,
    pub run: usize,
    pub accuracy: f64,
}

/// Everything a run produced, before it is written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub experiment: Experiment,
    pub window_n: usize,
    pub duration_feature: bool,
    pub runs_per_fold: usize,
    pub seed: u64,
    pub configurations: Vec<String>,
    /// Test intervention of every fold, by fold index.
    pub folds: Vec<String>,
    pub records: Vec<ResultRecord>,
    pub clean: Vec<CleanScore>,
}

/// Seed of the model for (dataset, mask, duration flag, n, fold, run).
/// It does not depend on the experiment, so E4 and E5 retrain exactly the
/// models of E1/E2 (or E3) when artifacts are not reused.
pub fn training_seed(cfg: &ExperimentConfig, dataset: &str, mask: &MaskConfig, fold: usize, run: usize) -> u64 {
    seed::derive(
        cfg.seed,
        &[
            TAG_TRAIN,
            seed::tag(dataset),
            mask.bits_u64(),
            u64::from(cfg.duration_feature()),
            cfg.window_n() as u64,
            fold as u64,
            run as u64,
        ],
    )
}

pub fn model_path(cfg: &ExperimentConfig, dataset: &str, mask: &MaskConfig, fold: usize, run: usize) -> Option<PathBuf> {
    let dir = cfg.model_dir.as_ref()?;
    let dur = if cfg.duration_feature() { "_dur" } else { "" };
    Some(dir.join(dataset).join(format!("{}{dur}_n{}_fold{fold:02}_run{run}.json", mask.bits(), cfg.window_n())))
}

/// Seeded noise spec for entry `index` of the config on `fold`; shared by
/// every configuration so that all of them see the same corrupted inputs.
fn noise_for_fold(cfg: &ExperimentConfig, index: usize, fold: usize) -> NoiseSpec {
    let n = cfg.noise[index];
    let seed = seed::derive(
        cfg.seed,
        &[TAG_NOISE, n.seed, n.kind as u64, n.rate.to_bits(), index as u64, fold as u64],
    );
    NoiseSpec { seed, ..n }
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Model { config: usize, fold: usize, run: usize },
    Baseline { config: usize, fold: usize },
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    d: &'a Dataset,
    folds: &'a [Fold],
    configs: &'a [MaskConfig],
    template: ModelConfig,
    freq: Option<FrequencyTable>,
}

#[derive(Default)]
struct JobOutput {
    records: Vec<ResultRecord>,
    clean: Vec<CleanScore>,
}

impl Ctx<'_> {
    fn record(&self, config: &MaskConfig, fold: usize, run: usize, accuracy: f64, unseen_rate: f64) -> ResultRecord {
        ResultRecord {
            dataset: self.d.name.clone(),
            experiment: self.cfg.experiment.to_string(),
            config: config.to_string(),
            noise_kind: String::new(),
            rate: None,
            delay_s: None,
            fold,
            run,
            sim: 0,
            accuracy,
            unseen_rate,
        }
    }

    fn test_intervention(&self, fold: usize) -> Result<&Intervention> {
        let id = &self.folds[fold].test;
        self.d.intervention(id).ok_or_else(|| Error::Validation(format!("unknown intervention `{id}`")))
    }

    fn model(&self, mask: &MaskConfig, fold: usize, run: usize) -> Result<TrainedModel> {
        let path = model_path(self.cfg, &self.d.name, mask, fold, run);
        if self.cfg.reuse_models {
            let path = path.expect("validated: reuse_models needs model_dir");
            let m = TrainedModel::load(&path)?;
            if m.mask != *mask || m.params.config.window_n != self.template.window_n {
                return Err(Error::Validation(format!("{} does not match this configuration", path.display())));
            }
            return Ok(m);
        }
        let seed = training_seed(self.cfg, &self.d.name, mask, fold, run);
        let m = train_model(self.d, &self.folds[fold].train, mask, &self.template, seed)?;
        if self.cfg.save_models {
            m.save(&path.expect("validated: save_models needs model_dir"))?;
        }
        Ok(m)
    }

    fn run_job(&self, job: Job) -> Result<JobOutput> {
        let mut out = JobOutput::default();
        match job {
            Job::Model { config, fold, run } => {
                let mask = &self.configs[config];
                let model = self.model(mask, fold, run)?;
                let iv = self.test_intervention(fold)?;
                let truth = &iv.activities;
                match self.cfg.experiment {
                    Experiment::OneElement | Experiment::TwoElement | Experiment::Duration => {
                        let s = model.score(truth, truth, self.d)?;
                        out.records.push(self.record(mask, fold, run, s.accuracy, s.unseen_rate));
                    }
                    Experiment::Noise => {
                        let clean = model.score(truth, truth, self.d)?;
                        out.clean.push(CleanScore { config: mask.to_string(), fold, run, accuracy: clean.accuracy });
                        for k in 0..self.cfg.noise.len() {
                            let spec = noise_for_fold(self.cfg, k, fold);
                            for sim in 0..spec.repetitions {
                                let observed = corrupt(truth, &spec.simulation(sim), self.freq.as_ref(), &self.d.vocab)?;
                                let s = model.score(&observed, truth, self.d)?;
                                out.records.push(ResultRecord {
                                    noise_kind: spec.kind.to_string(),
                                    rate: Some(spec.rate),
                                    sim,
                                    ..self.record(mask, fold, run, s.accuracy, s.unseen_rate)
                                });
                            }
                        }
                    }
                    Experiment::Delay => {
                        for delay in &self.cfg.delay {
                            let observed = apply_delay(iv, delay, mask);
                            let s = model.score_timeline(&observed, truth, self.d)?;
                            out.records.push(ResultRecord {
                                delay_s: Some(delay.delay_s),
                                ..self.record(mask, fold, run, s.accuracy, s.unseen_rate)
                            });
                        }
                    }
                }
            }
            Job::Baseline { config, fold } => {
                let mask = &self.configs[config];
                let iv = self.test_intervention(fold)?;
                let truth = &iv.activities;
                out.clean.push(CleanScore { config: mask.to_string(), fold, run: 0, accuracy: 1.0 });
                if self.cfg.experiment == Experiment::Noise {
                    for k in 0..self.cfg.noise.len() {
                        let spec = noise_for_fold(self.cfg, k, fold);
                        for sim in 0..spec.repetitions {
                            let observed = corrupt(truth, &spec.simulation(sim), self.freq.as_ref(), &self.d.vocab)?;
                            out.records.push(ResultRecord {
                                noise_kind: spec.kind.to_string(),
                                rate: Some(spec.rate),
                                sim,
                                ..self.record(mask, fold, 0, vis_baseline(&observed, truth)?, 0.0)
                            });
                        }
                    }
                } else {
                    for delay in &self.cfg.delay {
                        let observed = apply_delay(iv, delay, mask);
                        out.records.push(ResultRecord {
                            delay_s: Some(delay.delay_s),
                            ..self.record(mask, fold, 0, vis_baseline_timeline(&observed, truth)?, 0.0)
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Resolves the dataset and runs the experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let d = cfg.resolve_dataset()?;
    run_on(cfg, &d)
}

/// Runs the experiment on an already loaded dataset. Jobs (configuration x
/// fold x run) execute on a pool of `cfg.workers` threads; records are
/// sorted afterwards, so the report does not depend on scheduling.
pub fn run_on(cfg: &ExperimentConfig, d: &Dataset) -> Result<RunReport> {
    cfg.validate()?;
    d.validate()?;
    let mut folds = make_folds(d)?.folds;
    if let Some(k) = cfg.max_folds {
        folds.truncate(k);
    }
    let configs = cfg.configurations();
    let needs_table = cfg.experiment == Experiment::Noise && cfg.noise.iter().any(|n| n.kind.needs_frequency_table());
    let ctx = Ctx {
        cfg,
        d,
        folds: &folds,
        configs: &configs,
        template: cfg.model_config(),
        freq: needs_table.then(|| build_frequency_table(d)),
    };

    let mut jobs = Vec::new();
    for (ci, mask) in configs.iter().enumerate() {
        for fold in 0..folds.len() {
            if cfg.experiment.has_baseline() && *mask == MaskConfig::VIS {
                jobs.push(Job::Baseline { config: ci, fold });
            } else {
                for run in 1..=cfg.runs_per_fold {
                    jobs.push(Job::Model { config: ci, fold, run });
                }
            }
        }
    }

    let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<Result<JobOutput>> = pool.install(|| jobs.par_iter().map(|&j| ctx.run_job(j)).collect());

    let mut records = Vec::new();
    let mut clean = Vec::new();
    for o in outputs {
        let o = o?;
        records.extend(o.records);
        clean.extend(o.clean);
    }
    let names: Vec<String> = configs.iter().map(|m| m.to_string()).collect();
    let pos = |c: &str| names.iter().position(|n| n == c).unwrap_or(usize::MAX);
    records.sort_by(|a, b| {
        pos(&a.config)
            .cmp(&pos(&b.config))
            .then_with(|| a.noise_kind.cmp(&b.noise_kind))
            .then_with(|| a.rate.unwrap_or(-1.0).total_cmp(&b.rate.unwrap_or(-1.0)))
            .then_with(|| a.delay_s.unwrap_or(-1.0).total_cmp(&b.delay_s.unwrap_or(-1.0)))
            .then_with(|| (a.fold, a.run, a.sim).cmp(&(b.fold, b.run, b.sim)))
    });
    clean.sort_by(|a, b| pos(&a.config).cmp(&pos(&b.config)).then_with(|| (a.fold, a.run).cmp(&(b.fold, b.run))));

    Ok(RunReport {
        dataset: d.name.clone(),
        experiment: cfg.experiment,
        window_n: cfg.window_n(),
        duration_feature: cfg.duration_feature(),
        runs_per_fold: cfg.runs_per_fold,
        seed: cfg.seed,
        configurations: names,
        folds: folds.iter().map(|f| f.test.clone()).collect(),
        records,
        clean,
    })
}
