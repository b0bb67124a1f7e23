use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use surgact::evaluation::{aggregate, GroupKey};
use surgact::experiment::{self, compare_configs, compare_reports, load_report, Comparison, ExperimentConfig};
use surgact::seqmodel::{gradient_check, ModelConfig};
use surgact::synthgen::{generate_dataset, preset};
use surgact::workflow::{dataset_stats, load_dataset, save_dataset, Dataset};
use surgact::{Error, Result};

#[derive(Parser)]
#[command(name = "surgact", version, about = "Element-ablation experiments for surgical activity recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a preset.
    Generate {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (annotation files plus manifest.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory; overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Wilcoxon signed-rank tests on fold-level accuracies. With one report,
    /// every pair of its configurations; with two, matching configurations.
    Compare {
        report_a: PathBuf,
        report_b: Option<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print dataset statistics as JSON.
    Stats {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 12)]
        input_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    preset: Option<String>,
    /// Manifest file or dataset directory.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn generated(name: &str, seed: Option<u64>) -> Result<Dataset> {
    let mut spec = preset(name)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    generate_dataset(&spec)
}

fn load(path: &Path) -> Result<Dataset> {
    if path.is_dir() {
        load_dataset(&path.join("manifest.json"))
    } else {
        load_dataset(path)
    }
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io { path: p.to_path_buf(), source: e }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn comparisons_csv(rows: &[Comparison]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "a", "b", "noise_kind", "rate", "delay_s", "folds", "mean_a", "mean_b", "w", "z", "p_value", "effect_size",
        "exact", "spearman_rho", "spearman_p",
    ])?;
    for c in rows {
        let t = &c.wilcoxon;
        w.write_record([
            c.a.clone(),
            c.b.clone(),
            c.noise_kind.clone(),
            c.rate.clone(),
            c.delay_s.clone(),
            c.folds.to_string(),
            c.mean_a.to_string(),
            c.mean_b.to_string(),
            t.w.to_string(),
            t.z.to_string(),
            t.p_value.to_string(),
            t.effect_size.to_string(),
            t.exact.to_string(),
            c.spearman.map_or(String::new(), |s| s.rho.to_string()),
            c.spearman.map_or(String::new(), |s| s.p_value.to_string()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { preset, seed, out } => {
            let d = generated(&preset, seed)?;
            save_dataset(&d, &out)?;
            eprintln!("wrote {} interventions to {}", d.interventions.len(), out.display());
        }
        Command::Run { config, seed, out, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let d = cfg.resolve_dataset()?;
            let report = experiment::run_on(&cfg, &d)?;
            for path in experiment::write_report(&report, Some(&d), &dir)? {
                eprintln!("wrote {}", path.display());
            }
            let keys = [GroupKey::Config, GroupKey::NoiseKind, GroupKey::Rate, GroupKey::Delay];
            for row in aggregate(&report.records, &keys)? {
                let cond: Vec<&str> =
                    keys[1..].iter().map(|k| row.group[k.name()].as_str()).filter(|v| !v.is_empty()).collect();
                println!(
                    "{:<4} {:<18} mean {:.4}  sd {:.4}  n {}",
                    row.group["config"],
                    cond.join(" "),
                    row.mean,
                    row.sd,
                    row.n
                );
            }
        }
        Command::Compare { report_a, report_b, out } => {
            let a = load_report(&report_a)?;
            let rows = match report_b {
                Some(b) => compare_reports(&a, &load_report(&b)?)?,
                None => compare_configs(&a)?,
            };
            for c in &rows {
                println!(
                    "{} vs {} [{}{}{}] folds {}  {:.4} vs {:.4}  W {}  p {:.4e}  r {:.3}",
                    c.a,
                    c.b,
                    c.noise_kind,
                    c.rate,
                    c.delay_s,
                    c.folds,
                    c.mean_a,
                    c.mean_b,
                    c.wilcoxon.w,
                    c.wilcoxon.p_value,
                    c.wilcoxon.effect_size
                );
            }
            if let Some(path) = out {
                write_or_print(&comparisons_csv(&rows)?, Some(&path))?;
            }
        }
        Command::Stats { source, out } => {
            let d = match (source.preset, source.dataset) {
                (Some(p), _) => generated(&p, None)?,
                (None, Some(path)) => load(&path)?,
                (None, None) => unreachable!("clap enforces one source"),
            };
            let stats = dataset_stats(&d)?;
            write_or_print(&serde_json::to_string_pretty(&stats)?, out.as_deref())?;
        }
        Command::Gradcheck { layers, hidden, window, classes, input_dim, seed, tolerance } => {
            let cfg = ModelConfig {
                layers,
                hidden,
                window_n: window,
                n_classes: classes,
                input_dim,
                dropout_rate: 0.0,
                ..ModelConfig::default()
            };
            let err = gradient_check(&cfg, seed)?;
            println!("max relative error {err:.3e}");
            if !(err < tolerance) {
                return Err(Error::Validation(format!("gradient error {err:.3e} exceeds {tolerance:e}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
