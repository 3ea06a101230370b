use std::process::{Command, Output};

use entropic_bergstrom::runner::{self, SuiteConfig, SuiteReport};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entropic-bergstrom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_prints_every_registered_check() {
    let o = cli(&["list"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(str::to_owned).collect();
    assert_eq!(names, runner::check_names());
}

#[test]
fn default_config_round_trips() {
    let o = cli(&["default-config"]);
    assert!(o.status.success());
    let cfg = SuiteConfig::from_json(&stdout(&o)).unwrap();
    assert_eq!(cfg, SuiteConfig::default());
}

#[test]
fn check_writes_json_to_stdout() {
    let o = cli(&["check", "bergstrom", "--dim", "4", "--instances", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: SuiteReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report.records.len(), 3);
    assert!(report.records.iter().all(|r| r.dim == 4 && r.check_name == "bergstrom"));
    assert!(stderr(&o).contains("bergstrom"));
}

#[test]
fn check_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let o = cli(&[
        "check",
        "projective_fisher",
        "--instances",
        "2",
        "--samples",
        "2000",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(
        header,
        ["check_name", "instance_id", "dim", "lambda", "lhs", "rhs", "gap", "stderr", "verdict", "seed", "wall_ms"]
    );
    // each projective instance also carries its entropic Bergström record
    assert_eq!(reader.records().count(), 4);
}

#[test]
fn run_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.json");
    let out = dir.path().join("report.json");
    std::fs::write(
        &cfg,
        r#"{"checks": [{"name": "kyfan", "dims": [3, 5]}, {"name": "bonnesen_linear", "lambdas": [0.5]}],
            "instances_per_check": 4, "mc_samples": 2000, "seed": 7}"#,
    )
    .unwrap();
    let o = cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: SuiteReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.seed, 7);
    assert_eq!(report.records.len(), 8);
    let dims: Vec<usize> = report.records.iter().filter(|r| r.check_name == "kyfan").map(|r| r.dim).collect();
    assert_eq!(dims, [3, 5, 3, 5]);
}

#[test]
fn seed_flag_overrides_config_and_changes_output() {
    let run = |seed: &str| {
        let o = cli(&["check", "entropic_bergstrom", "--instances", "2", "--samples", "2000", "--seed", seed]);
        assert!(o.status.success());
        let mut r: SuiteReport = serde_json::from_str(&stdout(&o)).unwrap();
        r.records.iter_mut().for_each(|x| x.wall_ms = 0.0);
        r
    };
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3"), run("4"));
}

#[test]
fn unknown_check_exits_with_two_and_lists_names() {
    let o = cli(&["check", "bergstorm"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bergstorm") && err.contains("kyfan"), "{err}");
}

#[test]
fn misspelled_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"instance_per_check": 3}"#).unwrap();
    let o = cli(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("instance_per_check"));
}

#[test]
fn invalid_config_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"checks": [{"name": "kyfan", "dims": [1]}]}"#).unwrap();
    let o = cli(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    std::fs::write(&cfg, r#"{"mc_samples": 10}"#).unwrap();
    assert_eq!(cli(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn scan_lambda_reports_grid() {
    let o = cli(&["scan-lambda", "--dim", "2", "--grid", "5", "--samples", "5000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let scan: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(scan["lambdas"].as_array().unwrap().len(), 5);
    assert_eq!(scan["second_differences"].as_array().unwrap().len(), 3);
}

#[test]
fn scan_lambda_gaussian_pair_is_concave() {
    let o = cli(&["scan-lambda", "--dim", "3", "--grid", "9", "--components", "1"]);
    assert!(o.status.success());
    let scan: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(scan["non_concave"].as_array().unwrap().is_empty());
    assert!(scan["std_errors"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
}
