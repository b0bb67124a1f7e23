//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Criteria 6-8 train several hundred small models and
//! take around half an hour on one core.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::Check;
use surgact::corruption::{DelaySpec, NoiseKind, NoiseSpec};
use surgact::evaluation::{aggregate, GroupKey, ResultRecord};
use surgact::experiment::{run_on, Experiment, ExperimentConfig, ModelOverrides};
use surgact::synthgen::{generate_dataset, preset};
use surgact::workflow::{Dataset, MaskConfig};

const SEED: u64 = 2024;
const RUNS: usize = 3;
const MIN_GAP: f64 = 0.05;
const CS_IS_FLOOR: f64 = 0.90;
const TIME_BUDGET_S: f64 = 30.0 * 60.0;
/// Folds used for the duration-feature comparison.
const DURATION_FOLDS: usize = 8;
/// Largest change of IS accuracy that still counts as small.
const SMALL_CHANGE: f64 = 0.03;

/// Reduced desk-scale model shared by criteria 6-8.
fn model() -> ModelOverrides {
    ModelOverrides {
        layers: Some(1),
        hidden: Some(32),
        epochs: Some(10),
        learning_rate: Some(0.02),
        batch_size: Some(32),
        dropout_rate: Some(0.0),
    }
}

fn config(experiment: Experiment, dataset: &str, masks: &[&str]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(experiment, dataset);
    cfg.configurations = masks.iter().map(|s| s.parse::<MaskConfig>().unwrap()).collect();
    cfg.window_n = Some(5);
    cfg.runs_per_fold = RUNS;
    cfg.seed = SEED;
    cfg.model = model();
    cfg
}

/// Mean accuracy per (config, condition) over folds and runs.
fn means(records: &[ResultRecord], keys: &[GroupKey]) -> BTreeMap<Vec<String>, f64> {
    aggregate(records, keys)
        .unwrap()
        .into_iter()
        .map(|row| (keys.iter().map(|k| row.group[k.name()].clone()).collect(), row.mean))
        .collect()
}

fn by_config(records: &[ResultRecord]) -> BTreeMap<String, f64> {
    means(records, &[GroupKey::Config]).into_iter().map(|(k, v)| (k[0].clone(), v)).collect()
}

fn table(m: &BTreeMap<String, f64>) -> String {
    ["V", "I", "S", "VI", "VS", "IS"]
        .iter()
        .filter_map(|c| m.get(*c).map(|v| format!("{c} {v:.3}")))
        .collect::<Vec<_>>()
        .join(", ")
}

struct Clean {
    ldh: Dataset,
    records: Vec<ResultRecord>,
}

/// E1 + E2 on a preset; models are saved under `model_dir` when given.
fn clean_run(d: &Dataset, model_dir: Option<&Path>) -> Vec<ResultRecord> {
    let mut records = Vec::new();
    for (exp, masks) in [(Experiment::OneElement, ["V", "I", "S"]), (Experiment::TwoElement, ["VI", "VS", "IS"])] {
        let mut cfg = config(exp, &d.name, &masks);
        if let Some(dir) = model_dir {
            cfg.model_dir = Some(dir.to_path_buf());
            cfg.save_models = true;
        }
        records.extend(run_on(&cfg, d).unwrap().records);
    }
    records
}

fn ordering(m: &BTreeMap<String, f64>, gap: f64) -> (bool, String) {
    let best_single = m["V"].max(m["I"]).max(m["S"]);
    let gaps = [m["IS"] - m["VS"], m["VS"] - m["VI"], m["IS"] - best_single];
    let ok = gaps.iter().all(|g| *g >= gap && *g > 0.0);
    (ok, format!("gaps IS-VS {:.3}, VS-VI {:.3}, IS-max1 {:.3}", gaps[0], gaps[1], gaps[2]))
}

fn criterion_6(model_dir: &Path) -> (Check, Clean) {
    let start = Instant::now();
    let ldh = generate_dataset(&preset("LDH.R").unwrap()).unwrap();
    let ldh_records = clean_run(&ldh, Some(model_dir));
    let cs = generate_dataset(&preset("CS").unwrap()).unwrap();
    let cs_records = clean_run(&cs, None);
    let secs = start.elapsed().as_secs_f64();

    let (lm, cm) = (by_config(&ldh_records), by_config(&cs_records));
    let (ldh_ok, ldh_gaps) = ordering(&lm, MIN_GAP);
    let (cs_order, cs_gaps) = ordering(&cm, 0.0);
    let cs_ok = cs_order && cm["IS"] >= CS_IS_FLOOR;
    let detail = format!(
        "LDH.R [{}] {ldh_gaps}; CS [{}] {cs_gaps}; {:.1} min",
        table(&lm),
        table(&cm),
        secs / 60.0
    );
    (Check::new(ldh_ok && cs_ok && secs <= TIME_BUDGET_S, detail), Clean { ldh, records: ldh_records })
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

fn criterion_7(clean: &Clean, model_dir: &Path) -> Check {
    let rates = [0.0, 0.05, 0.25, 0.75];
    let mut noise = config(Experiment::Noise, "LDH.R", &["IS"]);
    noise.noise = rates.iter().map(|&r| NoiseSpec::new(NoiseKind::Uniform, r, 0)).collect();
    noise.model_dir = Some(model_dir.to_path_buf());
    noise.reuse_models = true;
    let records = run_on(&noise, &clean.ldh).unwrap().records;
    let is: Vec<ResultRecord> = records.into_iter().filter(|r| r.config == "IS").collect();
    let by_rate = means(&is, &[GroupKey::Rate]);
    let noise_curve: Vec<f64> = rates.iter().map(|r| by_rate[&vec![r.to_string()]]).collect();

    // rate 0 must reproduce the clean IS scores exactly, fold by fold
    let clean_is: BTreeMap<(usize, usize), f64> =
        clean.records.iter().filter(|r| r.config == "IS").map(|r| ((r.fold, r.run), r.accuracy)).collect();
    let same = is.iter().filter(|r| r.rate == Some(0.0)).all(|r| clean_is[&(r.fold, r.run)] == r.accuracy);
    let clean_mean = clean_is.values().sum::<f64>() / clean_is.len() as f64;

    let delays = [0.0, 1.0, 10.0, 30.0];
    let mut delay = config(Experiment::Delay, "LDH.R", &["IS"]);
    delay.delay = delays.iter().map(|&d| DelaySpec::new(d)).collect();
    let records = run_on(&delay, &clean.ldh).unwrap().records;
    let is: Vec<ResultRecord> = records.into_iter().filter(|r| r.config == "IS").collect();
    let by_delay = means(&is, &[GroupKey::Delay]);
    let delay_curve: Vec<f64> = delays.iter().map(|d| by_delay[&vec![d.to_string()]]).collect();

    let fmt = |xs: &[f64]| xs.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" > ");
    Check::new(
        non_increasing(&noise_curve) && non_increasing(&delay_curve) && same,
        format!(
            "noise {} (rate 0 = clean {clean_mean:.3}: {same}); delay {}",
            fmt(&noise_curve),
            fmt(&delay_curve)
        ),
    )
}

fn criterion_8(clean: &Clean) -> Check {
    let masks = ["V", "I", "S", "VI", "VS", "IS"];
    let mut cfg = config(Experiment::Duration, "LDH.R", &masks);
    cfg.max_folds = Some(DURATION_FOLDS);
    let with = by_config(&run_on(&cfg, &clean.ldh).unwrap().records);
    let without: Vec<ResultRecord> = clean.records.iter().filter(|r| r.fold < DURATION_FOLDS).cloned().collect();
    let without = by_config(&without);
    let gain = |c: &str| with[c] - without[c];
    let one = (gain("V") + gain("I") + gain("S")) / 3.0;
    let two = (gain("VI") + gain("VS") + gain("IS")) / 3.0;
    let gains: Vec<String> = masks.iter().map(|c| format!("{c} {:+.3}", gain(c))).collect();
    Check::new(
        one >= two && gain("IS").abs() <= SMALL_CHANGE,
        format!("gains [{}]; one-element mean {one:+.3} vs two-element {two:+.3}", gains.join(", ")),
    )
}

fn report(n: usize, name: &str, check: &Check) {
    let verdict = if check.pass { "PASS" } else { "FAIL" };
    println!("criterion {n} [{name}]: {verdict} - {}", check.detail);
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters: the suite is a single unit
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let model_dir = tempfile::tempdir().unwrap();
    let mut results = Vec::new();
    let mut record = |n: usize, name: &str, check: Check| {
        report(n, name, &check);
        results.push(check.pass);
    };

    record(1, "gradient fidelity", common::check_gradient());
    record(2, "mask/merge/format properties", common::check_properties(1_000));
    record(3, "noise calibration", common::check_noise_calibration());
    record(4, "VIS baseline closed form", common::check_vis_closed_form());
    record(5, "delay identity and conservation", common::check_delay());
    let (c6, clean) = criterion_6(model_dir.path());
    record(6, "element ordering", c6);
    record(7, "monotone degradation", criterion_7(&clean, model_dir.path()));
    record(8, "duration feature direction", criterion_8(&clean));
    record(9, "statistics oracles", common::check_statistics(1_000, 7));

    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
