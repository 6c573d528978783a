//! Command-line driver: loads (or defaults) a JSON experiment config,
//! applies flag overrides, runs the experiment, and exits with
//! 0 = success, 1 = a requested bound check failed, 2 = config error,
//! 3 = numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swe_lab::error::Error;
use swe_lab::harness::config::{EtaPolicy, ExperimentConfig, Overrides};
use swe_lab::harness::{load_config, run};

const DLN_HELP: &str = "\
Config fields and defaults:
  l=4  d=4  target={\"alpha_identity\":{\"alpha\":2.0}}  init=\"identity\"|\"zas\"
  mode=\"swe\"|\"no_sharing\"|\"always_shared\"|\"repara\"|\"symmetric_stem_swe\"
  steps=100000  untie=steps  unit_size/repeat_count=1/l  eta=\"auto\"
  stop_rel=1e-10  record_every=1  check_bounds=true  seeds=[0]";

const REGRESS_HELP: &str = "\
Config fields and defaults:
  l=200  n=120  n_test=1000  steps=500  untie=100  eta=\"auto\"  seeds=[0]
Each seed also trains a plain-GD baseline (written as <seed>_baseline.csv).";

const STACKED_HELP: &str = "\
Config fields and defaults:
  l=8  d=16  n_train=256  n_test=256  batch=32  steps=2000  untie=steps/10
  unit_size/repeat_count=1/l  eta=0.05  record_every=10  teacher_seed=1000
  seeds=[0]";

const SWEEP_HELP: &str = "\
Config fields and defaults:
  task fields as in `stacked`; fractions=[0,0.05,0.1,0.2,0.5,1]
  shapes=[\"8x1\",\"4x2\",\"2x4\",\"1x8\"]  reps=10  untie=steps/10
  record_every=steps (finals only)";

const SCAN_HELP: &str = "\
Config fields and defaults:
  l_grid=[50,100,200,400]  n_grid=[25,50,100,200]  seeds=[0..19]";

#[derive(Parser)]
#[command(
    name = "swe-lab",
    about = "Numerical laboratory for share-then-unshare training schedules",
    after_help = "Output directory precedence: --out, then the config's out_dir, \
                  then $SWE_LAB_OUT, then ./swe_lab_out."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deep linear network trained against a matrix target
    #[command(after_help = DLN_HELP)]
    Dln(CommonArgs),
    /// Overparameterized linear regression with a plain-GD baseline
    #[command(after_help = REGRESS_HELP)]
    Regress(CommonArgs),
    /// Residual tanh stack on teacher-generated data
    #[command(after_help = STACKED_HELP)]
    Stacked(CommonArgs),
    /// Untie-point and grouping sweeps over one stacked task
    #[command(after_help = SWEEP_HELP)]
    Sweep(CommonArgs),
    /// Stem-error scaling scan over regression sizes
    #[command(after_help = SCAN_HELP)]
    Scan(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; omitted fields take the documented defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Depth override (layer count / regression dimension)
    #[arg(long = "L")]
    l: Option<usize>,
    /// Width override
    #[arg(long)]
    d: Option<usize>,
    /// Training-step override
    #[arg(long)]
    steps: Option<usize>,
    /// Untie-step override
    #[arg(long)]
    untie: Option<usize>,
    /// Step size: a number, or "auto" for the theory-prescribed bound
    #[arg(long)]
    eta: Option<String>,
    /// Seed (repeatable; replaces the config's seeds list)
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Dln(a) => ("dln", a),
        Command::Regress(a) => ("regress", a),
        Command::Stacked(a) => ("stacked", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Scan(a) => ("scan", a),
    };
    match execute(kind, args) {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            match &err {
                Error::Config(violations) => {
                    eprintln!("configuration error:");
                    for v in violations {
                        eprintln!("  - {v}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(kind: &str, args: &CommonArgs) -> swe_lab::Result<bool> {
    let mut config = match &args.config {
        Some(path) => {
            let loaded = load_config(path)?;
            if loaded.kind() != kind {
                return Err(Error::Config(vec![format!(
                    "config file {} is for experiment {:?}, but the {kind} subcommand was invoked",
                    path.display(),
                    loaded.kind()
                )]));
            }
            loaded
        }
        None => ExperimentConfig::default_for(kind)?,
    };

    let eta = match &args.eta {
        Some(text) => Some(EtaPolicy::parse_cli(text)?),
        None => None,
    };
    config.apply_overrides(&Overrides {
        l: args.l,
        d: args.d,
        steps: args.steps,
        untie: args.untie,
        eta,
        seeds: args.seeds.clone(),
        out: args.out.as_ref().map(|p| p.display().to_string()),
    })?;

    let artifacts = run(&config)?;
    print!("{}", artifacts.report.render());
    println!("\nduration: {:.3}s", artifacts.report.duration.as_secs_f64());
    println!("artifacts: {}", artifacts.out_dir.display());
    Ok(artifacts.report.passed())
}
