//! End-to-end tests of the `swe-lab` binary: exit codes, artifact layout,
//! output-directory resolution, and determinism across reruns.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn swe_lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swe-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SWE_LAB_OUT")
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

#[test]
fn dln_run_exits_zero_and_writes_artifacts() {
    let tmp = tempdir().unwrap();
    let out = swe_lab(&["dln", "--steps", "400", "--out", "run"], tmp.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let text = stdout(&out);
    assert!(text.contains("status: PASS"), "stdout: {text}");
    assert!(text.contains("duration:"));
    assert!(text.contains("artifacts:"));

    let dir = tmp.path().join("run/dln");
    for name in ["0.csv", "summary.csv", "report.txt"] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("status: PASS"));
    assert!(!report.contains("duration"), "report files must stay deterministic");
}

#[test]
fn failed_bound_check_exits_one() {
    // Large but still convergent step size: training succeeds while the
    // per-step contraction certificate is violated.
    let tmp = tempdir().unwrap();
    let args = ["dln", "--d", "2", "--L", "2", "--steps", "60", "--eta", "0.45", "--out", "run"];
    let out = swe_lab(&args, tmp.path());
    assert_eq!(exit_code(&out), 1, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("status: FAIL"));

    let report = std::fs::read_to_string(tmp.path().join("run/dln/report.txt")).unwrap();
    assert!(report.contains("FAIL"));
}

#[test]
fn inapplicable_flag_exits_two() {
    let tmp = tempdir().unwrap();
    let out = swe_lab(&["regress", "--d", "4"], tmp.path());
    assert_eq!(exit_code(&out), 2);
    let text = stderr(&out);
    assert!(text.contains("configuration error"), "stderr: {text}");
    assert!(text.contains("--d does not apply to regress"));
}

#[test]
fn unknown_config_field_exits_two() {
    let tmp = tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, r#"{"experiment": "dln", "bogus": 1}"#).unwrap();
    let out = swe_lab(&["dln", "--config", "bad.json"], tmp.path());
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn config_for_wrong_subcommand_exits_two() {
    let tmp = tempdir().unwrap();
    let path = tmp.path().join("dln.json");
    std::fs::write(&path, r#"{"experiment": "dln"}"#).unwrap();
    let out = swe_lab(&["regress", "--config", "dln.json"], tmp.path());
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("is for experiment"));
}

#[test]
fn divergent_step_size_exits_three() {
    let tmp = tempdir().unwrap();
    let out = swe_lab(&["dln", "--L", "3", "--eta", "2.5", "--out", "run"], tmp.path());
    assert_eq!(exit_code(&out), 3);
    let text = stderr(&out);
    assert!(text.contains("diverged"), "stderr: {text}");
}

#[test]
fn reruns_produce_byte_identical_artifacts() {
    let tmp = tempdir().unwrap();
    let args = ["dln", "--steps", "300", "--seed", "0", "--seed", "1", "--out", "run"];
    assert_eq!(exit_code(&swe_lab(&args, tmp.path())), 0);

    let dir = tmp.path().join("run/dln");
    let names = ["0.csv", "1.csv", "summary.csv", "report.txt"];
    let first: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(dir.join(n)).unwrap()).collect();

    assert_eq!(exit_code(&swe_lab(&args, tmp.path())), 0);
    for (name, before) in names.iter().zip(&first) {
        let after = std::fs::read(dir.join(name)).unwrap();
        assert_eq!(&after, before, "{name} changed between identical runs");
    }
}

#[test]
fn out_dir_env_var_is_used_when_no_flag_is_given() {
    let tmp = tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_swe-lab"))
        .args(["dln", "--steps", "50"])
        .current_dir(tmp.path())
        .env("SWE_LAB_OUT", tmp.path().join("from_env"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    assert!(tmp.path().join("from_env/dln/report.txt").exists());
}

#[test]
fn out_flag_beats_env_var() {
    let tmp = tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_swe-lab"))
        .args(["dln", "--steps", "50", "--out", "from_flag"])
        .current_dir(tmp.path())
        .env("SWE_LAB_OUT", tmp.path().join("from_env"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    assert!(tmp.path().join("from_flag/dln/report.txt").exists());
    assert!(!tmp.path().join("from_env").exists());
}

#[test]
fn regress_writes_baseline_traces() {
    let tmp = tempdir().unwrap();
    let args = [
        "regress", "--L", "40", "--steps", "80", "--untie", "20", "--seed", "0", "--out", "run",
    ];
    let out = swe_lab(&args, tmp.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let dir = tmp.path().join("run/regress");
    for name in ["0.csv", "0_baseline.csv", "summary.csv", "report.txt"] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
}

#[test]
fn config_file_with_overrides_drives_a_stacked_run() {
    let tmp = tempdir().unwrap();
    let config = r#"{
        "experiment": "stacked",
        "l": 4, "d": 4, "n_train": 32, "n_test": 16,
        "batch": 8, "steps": 60, "untie": 10,
        "record_every": 20, "out_dir": "from_config"
    }"#;
    std::fs::write(tmp.path().join("stacked.json"), config).unwrap();

    let args = ["stacked", "--config", "stacked.json", "--steps", "40", "--seed", "5"];
    let out = swe_lab(&args, tmp.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let dir = tmp.path().join("from_config/stacked");
    assert!(dir.join("5.csv").exists(), "--seed should replace the config's seed list");
    assert!(!dir.join("0.csv").exists());
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.lines().any(|line| line.starts_with("5,")), "summary: {summary}");
}

#[test]
fn sweep_writes_long_form_and_summary_tables() {
    let tmp = tempdir().unwrap();
    let config = r#"{
        "experiment": "sweep",
        "l": 4, "d": 4, "n_train": 32, "n_test": 16,
        "batch": 8, "steps": 40, "reps": 2,
        "fractions": [0.0, 0.5, 1.0], "shapes": ["4x1", "2x2"],
        "out_dir": "run"
    }"#;
    std::fs::write(tmp.path().join("sweep.json"), config).unwrap();
    let out = swe_lab(&["sweep", "--config", "sweep.json"], tmp.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let dir = tmp.path().join("run/sweep");
    let names = [
        "untie.csv",
        "untie_summary.csv",
        "grouping.csv",
        "grouping_summary.csv",
        "summary.csv",
        "report.txt",
    ];
    for name in names {
        assert!(dir.join(name).exists(), "missing {name}");
    }
}

#[test]
fn scan_writes_grid_and_per_seed_slices() {
    let tmp = tempdir().unwrap();
    let config = r#"{
        "experiment": "scan",
        "l_grid": [20, 40], "n_grid": [10], "seeds": [0, 1],
        "out_dir": "run"
    }"#;
    std::fs::write(tmp.path().join("scan.json"), config).unwrap();
    let out = swe_lab(&["scan", "--config", "scan.json"], tmp.path());
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let dir = tmp.path().join("run/scan");
    for name in ["scan.csv", "0.csv", "1.csv", "summary.csv", "report.txt"] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("L,n,mean_err_stem,mean_ratio"));
    assert_eq!(summary.lines().count(), 3, "one row per (L, n) cell plus header");
}

#[test]
fn help_describes_output_directory_precedence() {
    let tmp = tempdir().unwrap();
    let out = swe_lab(&["--help"], tmp.path());
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("SWE_LAB_OUT"));
    for sub in ["dln", "regress", "stacked", "sweep", "scan"] {
        assert!(text.contains(sub), "help should list {sub}");
    }
}
