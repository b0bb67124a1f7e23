use std::process::Command;

fn surgact() -> Command {
    Command::new(env!("CARGO_BIN_EXE_surgact"))
}

#[test]
fn generate_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cs");
    let out = surgact().args(["generate", "--preset", "CS", "--seed", "4", "--out"]).arg(&data).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("manifest.json").exists());

    let out = surgact().args(["stats", "--dataset"]).arg(&data).output().unwrap();
    assert!(out.status.success());
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["interventions"], 19);
}

#[test]
fn run_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("e1.toml");
    std::fs::write(
        &config,
        r#"
experiment = "E1"
dataset = "CS"
window_n = 2
runs_per_fold = 1
max_folds = 10
[model]
layers = 1
hidden = 8
epochs = 2
learning_rate = 0.02
batch_size = 32
dropout_rate = 0.0
"#,
    )
    .unwrap();
    let report = dir.path().join("report");
    let out = surgact()
        .args(["run", "--workers", "1", "--seed", "9", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report.join("element_accuracy.csv").exists());

    let table = dir.path().join("cmp.csv");
    let out = surgact().arg("compare").arg(&report).arg("--out").arg(&table).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&table).unwrap().lines().count(), 4);

    let out = surgact().arg("compare").arg(&report).arg(&report).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn errors_exit_nonzero() {
    let out = surgact().args(["stats", "--preset", "XYZ"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));

    let out = surgact().args(["run", "--config", "/nonexistent/config.toml"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn gradcheck_passes() {
    let out = surgact().args(["gradcheck", "--seed", "2"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max relative error"));
}
