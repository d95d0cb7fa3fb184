use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_branchstab"));
    c.env_remove("BRANCHSTAB_WORKERS");
    c
}

fn write_config(dir: &Path, name: &str, body: serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_fstable_rv(corrupt: f64) -> serde_json::Value {
    serde_json::json!({
        "schema_version": 1,
        "scenario": "fstable-rv",
        "seed": 11,
        "n": 20000,
        "t_grid": [0.5],
        "semigroup": { "kind": "linear_birth_death", "lambda": 1.0 },
        "stable": { "alpha": 0.5, "c": 1.0 },
        "corrupt_alpha": corrupt,
        "csv_rows": 50
    })
}

#[test]
fn list_names_every_scenario() {
    let out = run(&["--list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["semigroup-validate", "fstable-rv", "das-pp", "fstable-pp", "dt-pp", "dt-levy-probe", "cb-feller", "cb-vstable", "cox-coupling"] {
        assert!(text.contains(name), "{name} missing from --list");
    }
}

#[test]
fn passing_scenario_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", small_fstable_rv(0.0));
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["report.json", "reports.csv", "samples.csv"] {
        assert!(dir.path().join(f).exists(), "{f} not written");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["seed"], 11);
}

#[test]
fn corrupted_exponent_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", small_fstable_rv(0.3));
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = small_fstable_rv(0.0);
    body["stable"]["alpha"] = serde_json::json!(1.5);
    let cfg = write_config(dir.path(), "cfg.json", body);
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "typo.json", serde_json::json!({"schema_version": 1, "scenario": "fstable-rv", "sed": 3}));
    assert_eq!(run(&["--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    let missing = dir.path().join("absent.json");
    assert_eq!(run(&["--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unknown_scenario_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", serde_json::json!({"schema_version": 1, "scenario": "no-such-thing"}));
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn replay_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", small_fstable_rv(0.0));
    assert!(run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]).status.success());
    let report = dir.path().join("report.json");
    assert_eq!(run(&["--replay", report.to_str().unwrap()]).status.code(), Some(0));

    let text = std::fs::read_to_string(&report).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["seed"] = serde_json::json!(12);
    v["config"]["seed"] = serde_json::json!(12);
    let tampered = dir.path().join("seed.json");
    std::fs::write(&tampered, serde_json::to_string_pretty(&v).unwrap() + "\n").unwrap();
    assert_eq!(run(&["--replay", tampered.to_str().unwrap()]).status.code(), Some(5));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["config"]["n"] = serde_json::json!(20001);
    let tampered = dir.path().join("n.json");
    std::fs::write(&tampered, serde_json::to_string_pretty(&v).unwrap() + "\n").unwrap();
    assert_eq!(run(&["--replay", tampered.to_str().unwrap()]).status.code(), Some(5));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", small_fstable_rv(0.0));
    let out = run(&["--config", cfg.to_str().unwrap(), "--seed", "99", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 99);
}

#[test]
fn report_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", small_fstable_rv(0.0));
    let mut reports = Vec::new();
    for workers in ["1", "3"] {
        let out_dir = dir.path().join(workers);
        std::fs::create_dir(&out_dir).unwrap();
        let out = run(&["--config", cfg.to_str().unwrap(), "--workers", workers, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success());
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
        reports.push(std::fs::read(out_dir.join("samples.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[2]);
    assert_eq!(reports[1], reports[3]);
}

#[test]
fn zero_workers_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", small_fstable_rv(0.0));
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "--workers", "0", "--out", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema_version"], 1, "{}", path.display());
    }
}
