//! Experiment dispatch and artifact emission.
//!
//! Every experiment writes into `<out>/<experiment>/`: one trace CSV per
//! seed (sweeps write their long-form tables instead), a `summary.csv`, and
//! a `report.txt`. All files are deterministic functions of the config.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::core_math::spd_extremes;
use crate::core_math::stats::median;
use crate::deep_linear::{
    check_contraction, check_envelope, check_trace_bound, stem_envelope, train_dln, CheckReport,
    DlnInit, EtaChoice, LossThreshold, StopRule,
};
use crate::error::{Error, Result};
use crate::harness::config::{
    DlnConfig, EtaPolicy, ExperimentConfig, RegressConfig, ScanConfig, StackedConfig, SweepConfig,
};
use crate::harness::report::{summarize, summary_csv, CheckOutcome, RunReport, SeedSummary};
use crate::regression::{fit_loglog_slope, make_problem, prop1_error_scan, train_regression};
use crate::stacked::{grouping_sweep, make_task, train_stacked, untie_sweep};
use crate::swe_optim::{LearningRate, SweMode, SweSchedule};
use crate::trace::Trace;

/// A finished run: the report plus every file written.
#[derive(Debug)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Output directory precedence: explicit config value, then `SWE_LAB_OUT`,
/// then `./swe_lab_out`.
#[must_use]
pub fn resolve_out_dir(configured: Option<&str>) -> PathBuf {
    match configured {
        Some(dir) => PathBuf::from(dir),
        None => std::env::var_os("SWE_LAB_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("swe_lab_out")),
    }
}

/// Validates and runs a config, writing artifacts under its output
/// directory.
///
/// # Errors
/// Validation failures, I/O failures, and training failures propagate; a
/// failing bound check is NOT an error (it is reported, and the report's
/// status drives the exit code).
pub fn run(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let started = Instant::now();
    let dir = resolve_out_dir(config.out_dir()).join(config.kind());
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut emitter = Emitter {
        dir: &dir,
        files: Vec::new(),
    };
    let mut report = match config {
        ExperimentConfig::Dln(c) => run_dln(c, &mut emitter)?,
        ExperimentConfig::Regress(c) => run_regress(c, &mut emitter)?,
        ExperimentConfig::Stacked(c) => run_stacked(c, &mut emitter)?,
        ExperimentConfig::Sweep(c) => run_sweep(c, &mut emitter)?,
        ExperimentConfig::Scan(c) => run_scan(c, &mut emitter)?,
    };
    report.experiment = config.kind().to_string();
    report.config_json = config.canonical_json();
    report.duration = started.elapsed();
    let report_path = emitter.write_text("report.txt", &report.render())?;
    let mut files = emitter.files;
    files.push(report_path);
    Ok(RunArtifacts {
        report,
        out_dir: dir,
        files,
    })
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Emitter<'_> {
    fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn write_trace(&mut self, name: &str, trace: &Trace) -> Result<()> {
        let path = self.dir.join(name);
        trace.write_csv(&path)?;
        self.files.push(path);
        Ok(())
    }

    fn write_summary(&mut self, traces: &[&Trace], labels: &[String]) -> Result<()> {
        let record = summarize(traces)?;
        let text = summary_csv(&record, labels)?;
        self.write_text("summary.csv", &text)?;
        Ok(())
    }
}

fn blank_report() -> RunReport {
    RunReport {
        experiment: String::new(),
        config_json: String::new(),
        seeds: Vec::new(),
        aggregates: Vec::new(),
        checks: Vec::new(),
        duration: std::time::Duration::ZERO,
    }
}

fn outcome(name: String, report: &CheckReport) -> CheckOutcome {
    let detail = match &report.first_violation {
        None => format!("{} rows checked", report.checked),
        Some(v) => format!(
            "step {}: observed {} exceeds allowed {}",
            v.step, v.observed, v.allowed
        ),
    };
    CheckOutcome {
        name,
        passed: report.passed(),
        detail,
    }
}

fn median_of(label: &str, values: &[f64]) -> Result<(String, f64)> {
    Ok((label.to_string(), median(values)?))
}

fn run_dln(c: &DlnConfig, emitter: &mut Emitter) -> Result<RunReport> {
    let untie = c.untie.unwrap_or(c.steps);
    let (unit, repeat) = match (c.unit_size, c.repeat_count) {
        (Some(a), Some(b)) => (a, b),
        _ => (1, c.l),
    };
    let schedule = SweSchedule::new(c.mode, c.steps, untie, unit, repeat, LearningRate::Constant(0.0))?;
    let stop = StopRule {
        max_steps: c.steps,
        loss_threshold: LossThreshold::RelativeToInitial(c.stop_rel),
    };
    let eta_choice = match c.eta {
        EtaPolicy::Auto => EtaChoice::Auto,
        EtaPolicy::Fixed(v) => EtaChoice::Fixed(v),
    };
    let init = DlnInit::from(c.init);

    let mut report = blank_report();
    let mut traces = Vec::new();
    let mut finals = Vec::new();
    let mut steps_taken = Vec::new();
    for &seed in &c.seeds {
        let spec = c.target.to_spec(c.d, seed)?;
        let run = train_dln(&spec, init, &schedule, eta_choice, &stop, c.record_every)?;
        emitter.write_trace(&format!("{seed}.csv"), &run.trace)?;

        if c.check_bounds {
            let target = spec.build()?;
            if let Ok((lo, _)) = spd_extremes(&target) {
                match init {
                    DlnInit::Identity => {
                        let rate = (2 * c.l).saturating_sub(2) as f64 * (lo * lo).min(1.0) * run.eta;
                        let contraction = check_contraction(&run.trace, rate)?;
                        report.checks.push(outcome(format!("seed {seed} contraction"), &contraction));
                        let (env_lo, env_hi) = stem_envelope(&target, c.l)?;
                        let envelope = check_envelope(&run.trace, env_lo, env_hi)?;
                        report.checks.push(outcome(format!("seed {seed} envelope"), &envelope));
                    }
                    DlnInit::Zas => {
                        let bound = check_trace_bound(&run.trace)?;
                        report.checks.push(outcome(format!("seed {seed} zas bound"), &bound));
                    }
                }
            }
        }

        report.seeds.push(SeedSummary {
            seed,
            metrics: vec![
                ("initial_loss".into(), run.initial_loss),
                ("final_loss".into(), run.final_loss),
                ("steps_taken".into(), run.steps_taken as f64),
                ("eta".into(), run.eta),
            ],
        });
        finals.push(run.final_loss);
        steps_taken.push(run.steps_taken as f64);
        traces.push(run.trace);
    }
    report.aggregates.push(median_of("median_final_loss", &finals)?);
    report.aggregates.push(median_of("median_steps_taken", &steps_taken)?);

    let refs: Vec<&Trace> = traces.iter().collect();
    let labels: Vec<String> = c.seeds.iter().map(u64::to_string).collect();
    emitter.write_summary(&refs, &labels)?;
    Ok(report)
}

fn run_regress(c: &RegressConfig, emitter: &mut Emitter) -> Result<RunReport> {
    let swe = SweSchedule::full_sharing(SweMode::Swe, c.steps, c.untie, c.l, 0.0)?;
    let baseline = SweSchedule::full_sharing(SweMode::NoSharing, c.steps, 0, c.l, 0.0)?;
    let eta = match c.eta {
        EtaPolicy::Auto => None,
        EtaPolicy::Fixed(v) => Some(v),
    };

    let mut report = blank_report();
    let mut traces = Vec::new();
    let mut ratios = Vec::new();
    let mut finals = Vec::new();
    let mut baseline_finals = Vec::new();
    for &seed in &c.seeds {
        let problem = make_problem(c.l, c.n, c.n_test, seed)?;
        let run = train_regression(&problem, &swe, eta)?;
        let base = train_regression(&problem, &baseline, eta)?;
        emitter.write_trace(&format!("{seed}.csv"), &run.trace)?;
        emitter.write_trace(&format!("{seed}_baseline.csv"), &base.trace)?;

        let ratio = run.final_test_mse / base.final_test_mse;
        report.seeds.push(SeedSummary {
            seed,
            metrics: vec![
                ("final_train_mse".into(), run.final_train_mse),
                ("final_test_mse".into(), run.final_test_mse),
                ("baseline_test_mse".into(), base.final_test_mse),
                ("test_mse_ratio".into(), ratio),
            ],
        });
        ratios.push(ratio);
        finals.push(run.final_test_mse);
        baseline_finals.push(base.final_test_mse);
        traces.push(run.trace);
    }
    report.aggregates.push(median_of("median_test_mse_ratio", &ratios)?);
    report.aggregates.push(median_of("median_final_test_mse", &finals)?);
    report
        .aggregates
        .push(median_of("median_baseline_test_mse", &baseline_finals)?);

    let refs: Vec<&Trace> = traces.iter().collect();
    let labels: Vec<String> = c.seeds.iter().map(u64::to_string).collect();
    emitter.write_summary(&refs, &labels)?;
    Ok(report)
}

fn stacked_eta(eta: EtaPolicy) -> Result<f64> {
    match eta {
        EtaPolicy::Fixed(v) => Ok(v),
        EtaPolicy::Auto => Err(Error::Config(vec![
            "eta \"auto\" is not defined for this experiment; give a number".into(),
        ])),
    }
}

fn run_stacked(c: &StackedConfig, emitter: &mut Emitter) -> Result<RunReport> {
    let task = make_task(c.l, c.d, c.n_train, c.n_test, c.teacher_seed)?;
    let untie = c.untie.unwrap_or(c.steps / 10);
    let (unit, repeat) = match (c.unit_size, c.repeat_count) {
        (Some(a), Some(b)) => (a, b),
        _ => (1, c.l),
    };
    let eta = stacked_eta(c.eta)?;
    let schedule = SweSchedule::new(SweMode::Swe, c.steps, untie, unit, repeat, LearningRate::Constant(eta))?;

    let mut report = blank_report();
    let mut traces = Vec::new();
    let mut finals = Vec::new();
    for &seed in &c.seeds {
        let run = train_stacked(&task, &schedule, eta, c.batch, seed, c.record_every)?;
        emitter.write_trace(&format!("{seed}.csv"), &run.trace)?;
        report.seeds.push(SeedSummary {
            seed,
            metrics: vec![
                ("initial_train_mse".into(), run.initial_train_mse),
                ("final_train_mse".into(), run.final_train_mse),
                ("final_test_mse".into(), run.final_test_mse),
            ],
        });
        finals.push(run.final_test_mse);
        traces.push(run.trace);
    }
    report.aggregates.push(median_of("median_final_test_mse", &finals)?);

    let refs: Vec<&Trace> = traces.iter().collect();
    let labels: Vec<String> = c.seeds.iter().map(u64::to_string).collect();
    emitter.write_summary(&refs, &labels)?;
    Ok(report)
}

fn run_sweep(c: &SweepConfig, emitter: &mut Emitter) -> Result<RunReport> {
    let task = make_task(c.l, c.d, c.n_train, c.n_test, c.teacher_seed)?;
    let eta = stacked_eta(c.eta)?;
    let untie = c.untie.unwrap_or(c.steps / 10);
    let record_every = c.record_every.unwrap_or(c.steps);

    let untie_table = untie_sweep(&task, &c.fractions, c.reps, c.steps, eta, c.batch, record_every)?;
    emitter.write_text("untie.csv", &untie_table.to_csv())?;
    emitter.write_text("untie_summary.csv", &untie_table.summary_csv())?;

    let shapes = c.parsed_shapes()?;
    let grouping_table = grouping_sweep(&task, &shapes, c.reps, c.steps, untie, eta, c.batch, record_every)?;
    emitter.write_text("grouping.csv", &grouping_table.to_csv())?;
    emitter.write_text("grouping_summary.csv", &grouping_table.summary_csv())?;

    let mut report = blank_report();
    // One CSV per repetition seed, slicing both sweeps.
    for seed in 0..c.reps as u64 {
        let mut text = String::from("config,seed,final_test_mse\n");
        let mut finals = Vec::new();
        for row in untie_table.rows().iter().chain(grouping_table.rows()) {
            if row.seed == seed {
                text.push_str(&format!("{},{},{}\n", row.config, row.seed, row.final_test_mse));
                finals.push(row.final_test_mse);
            }
        }
        emitter.write_text(&format!("{seed}.csv"), &text)?;
        report.seeds.push(SeedSummary {
            seed,
            metrics: vec![median_of("median_final_test_mse", &finals)?],
        });
    }

    let mut combined = String::from("sweep,config,median_final_test_mse\n");
    for (config, value) in untie_table.medians() {
        combined.push_str(&format!("untie,{config},{value}\n"));
        report.aggregates.push((format!("untie[{config}]"), value));
    }
    for (config, value) in grouping_table.medians() {
        combined.push_str(&format!("grouping,{config},{value}\n"));
        report.aggregates.push((format!("grouping[{config}]"), value));
    }
    emitter.write_text("summary.csv", &combined)?;
    Ok(report)
}

fn run_scan(c: &ScanConfig, emitter: &mut Emitter) -> Result<RunReport> {
    let table = prop1_error_scan(&c.l_grid, &c.n_grid, &c.seeds)?;
    emitter.write_trace("scan.csv", &table)?;
    let slope = fit_loglog_slope(&table)?;

    let mut report = blank_report();
    report.aggregates.push(("loglog_slope".into(), slope));

    // One CSV per seed (its slice of the grid) and its mean scaling ratio.
    for &seed in &c.seeds {
        let mut slice = Trace::new(&crate::regression::SCAN_COLUMNS);
        let mut acc = 0.0;
        let mut count = 0usize;
        for row in 0..table.num_rows() {
            if table.get(row, "seed") == Some(seed as f64) {
                slice.push_row(table.row(row).to_vec())?;
                acc += table.get(row, "ratio_sqrt_L_over_n").expect("scan rows are dense");
                count += 1;
            }
        }
        emitter.write_trace(&format!("{seed}.csv"), &slice)?;
        report.seeds.push(SeedSummary {
            seed,
            metrics: vec![("mean_ratio".into(), acc / count as f64)],
        });
    }

    // Per-cell means over seeds.
    let mut summary = String::from("L,n,mean_err_stem,mean_ratio\n");
    for &l in &c.l_grid {
        for &n in &c.n_grid {
            let mut err_acc = 0.0;
            let mut ratio_acc = 0.0;
            let mut count = 0usize;
            for row in 0..table.num_rows() {
                if table.get(row, "L") == Some(l as f64) && table.get(row, "n") == Some(n as f64) {
                    err_acc += table.get(row, "err_stem").expect("scan rows are dense");
                    ratio_acc += table.get(row, "ratio_sqrt_L_over_n").expect("scan rows are dense");
                    count += 1;
                }
            }
            summary.push_str(&format!(
                "{l},{n},{},{}\n",
                err_acc / count as f64,
                ratio_acc / count as f64
            ));
        }
    }
    emitter.write_text("summary.csv", &summary)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn run_in_temp(json: &str) -> (tempfile::TempDir, RunArtifacts) {
        let dir = tempfile::tempdir().unwrap();
        let json = json.replace("OUT", dir.path().to_str().unwrap());
        let config = parse_config(&json).unwrap();
        let artifacts = run(&config).unwrap();
        (dir, artifacts)
    }

    #[test]
    fn dln_auto_eta_spd_run_reports_contraction_pass() {
        let (_dir, artifacts) = run_in_temp(
            r#"{"experiment": "dln", "l": 3, "d": 2,
                "target": {"spd_spectrum": {"eigenvalues": [0.8, 1.6], "rotation_seed": 5}},
                "steps": 3000, "seeds": [0, 1], "out_dir": "OUT"}"#,
        );
        assert!(artifacts.report.passed());
        let names: Vec<&str> = artifacts.report.checks.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"seed 0 contraction"));
        assert!(names.contains(&"seed 1 envelope"));
        assert!(artifacts.report.render().contains("contraction: PASS"));

        for name in ["0.csv", "1.csv", "summary.csv", "report.txt"] {
            assert!(artifacts.out_dir.join(name).exists(), "{name}");
        }
        // Every configured seed appears exactly once.
        let seeds: Vec<u64> = artifacts.report.seeds.iter().map(|s| s.seed).collect();
        assert_eq!(seeds, vec![0, 1]);

        // Emitted trace CSVs parse back into the trace schema.
        let reloaded = Trace::read_csv(&artifacts.out_dir.join("0.csv")).unwrap();
        assert_eq!(reloaded.columns(), crate::deep_linear::DLN_TRACE_COLUMNS);
    }

    #[test]
    fn dln_oversized_eta_fails_the_bound_checks() {
        let (_dir, artifacts) = run_in_temp(
            r#"{"experiment": "dln", "l": 2, "d": 2, "eta": 0.45,
                "steps": 60, "stop_rel": 1e-14, "out_dir": "OUT"}"#,
        );
        assert!(!artifacts.report.passed());
        assert!(artifacts.report.render().contains("status: FAIL"));
    }

    #[test]
    fn regress_report_contains_median_test_ratio() {
        let (_dir, artifacts) = run_in_temp(
            r#"{"experiment": "regress", "l": 40, "n": 24, "n_test": 50,
                "steps": 60, "untie": 12, "seeds": [0, 1, 2], "out_dir": "OUT"}"#,
        );
        let report = &artifacts.report;
        assert!(report.aggregates.iter().any(|(k, _)| k == "median_test_mse_ratio"));
        assert!(artifacts.out_dir.join("1_baseline.csv").exists());
        assert_eq!(report.seeds.len(), 3);
    }

    #[test]
    fn byte_identical_artifacts_across_reruns() {
        let dir = tempfile::tempdir().unwrap();
        let json = r#"{"experiment": "stacked", "l": 4, "d": 4, "n_train": 24, "n_test": 16,
                       "batch": 8, "steps": 30, "untie": 3, "record_every": 10,
                       "seeds": [0, 1], "out_dir": "OUT"}"#
            .replace("OUT", dir.path().to_str().unwrap());
        let config = parse_config(&json).unwrap();
        let names = ["0.csv", "1.csv", "summary.csv", "report.txt"];

        let first = run(&config).unwrap();
        let snapshot: Vec<Vec<u8>> = names
            .iter()
            .map(|n| std::fs::read(first.out_dir.join(n)).unwrap())
            .collect();
        let second = run(&config).unwrap();
        for (name, before) in names.iter().zip(snapshot) {
            let after = std::fs::read(second.out_dir.join(name)).unwrap();
            assert_eq!(before, after, "{name} differs across reruns");
        }
    }

    #[test]
    fn sweep_writes_long_form_and_summary_tables() {
        let (_dir, artifacts) = run_in_temp(
            r#"{"experiment": "sweep", "l": 4, "d": 4, "n_train": 24, "n_test": 16,
                "batch": 8, "steps": 20, "reps": 2,
                "fractions": [0.0, 0.5, 1.0], "shapes": ["4x1", "2x2", "1x4"],
                "out_dir": "OUT"}"#,
        );
        for name in ["untie.csv", "untie_summary.csv", "grouping.csv", "grouping_summary.csv", "summary.csv", "0.csv", "1.csv"] {
            assert!(artifacts.out_dir.join(name).exists(), "{name}");
        }
        let per_seed = std::fs::read_to_string(artifacts.out_dir.join("0.csv")).unwrap();
        assert_eq!(per_seed.lines().count(), 1 + 3 + 3);
        let untie = std::fs::read_to_string(artifacts.out_dir.join("untie.csv")).unwrap();
        assert_eq!(untie.lines().count(), 1 + 3 * 2);
        assert_eq!(artifacts.report.aggregates.len(), 6);
    }

    #[test]
    fn scan_reports_slope_and_cell_means() {
        let (_dir, artifacts) = run_in_temp(
            r#"{"experiment": "scan", "l_grid": [16, 32], "n_grid": [8, 16],
                "seeds": [0, 1, 2, 3], "out_dir": "OUT"}"#,
        );
        assert!(artifacts.report.aggregates.iter().any(|(k, _)| k == "loglog_slope"));
        let summary = std::fs::read_to_string(artifacts.out_dir.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + 4);
        let table = Trace::read_csv(&artifacts.out_dir.join("scan.csv")).unwrap();
        assert_eq!(table.num_rows(), 2 * 2 * 4);
        let slice = Trace::read_csv(&artifacts.out_dir.join("3.csv")).unwrap();
        assert_eq!(slice.num_rows(), 2 * 2);
        assert_eq!(slice.columns(), table.columns());
    }

    #[test]
    fn invalid_config_refuses_to_run() {
        let config = parse_config(r#"{"experiment": "dln", "seeds": []}"#).unwrap();
        assert!(matches!(run(&config), Err(Error::Config(_))));
    }
}
