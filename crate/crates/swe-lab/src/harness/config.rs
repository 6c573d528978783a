//! Strict JSON experiment configurations.
//!
//! Parsing is two-staged: the `experiment` tag picks the config shape, then
//! the full document is parsed with unknown fields rejected. Every field has
//! a documented default, so `{"experiment": "dln"}` is a complete config.
//! Validation collects every violation instead of stopping at the first.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deep_linear::{DlnInit, TargetKind, TargetSpec};
use crate::error::{Error, Result};
use crate::swe_optim::SweMode;

/// Step-size policy: `"auto"` resolves to the theory-prescribed bound of the
/// experiment (deep-linear init rules, regression curvature), a number is
/// used as-is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPolicy {
    Auto,
    Fixed(f64),
}

impl EtaPolicy {
    /// Parses the CLI spelling: `auto` or a number.
    ///
    /// # Errors
    /// Fails on anything else.
    pub fn parse_cli(text: &str) -> Result<Self> {
        if text == "auto" {
            return Ok(EtaPolicy::Auto);
        }
        text.parse::<f64>()
            .map(EtaPolicy::Fixed)
            .map_err(|_| Error::Config(vec![format!("eta must be a number or \"auto\", got {text:?}")]))
    }
}

impl Serialize for EtaPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EtaPolicy::Auto => serializer.serialize_str("auto"),
            EtaPolicy::Fixed(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EtaPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(EtaPolicy::Fixed(v)),
            Raw::Text(s) if s == "auto" => Ok(EtaPolicy::Auto),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "eta must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

/// Layer-stack initialization, config spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    Identity,
    Zas,
}

impl From<InitConfig> for DlnInit {
    fn from(value: InitConfig) -> Self {
        match value {
            InitConfig::Identity => DlnInit::Identity,
            InitConfig::Zas => DlnInit::Zas,
        }
    }
}

/// Target recipe, config spelling. The run seed is added to the stated
/// rotation/perturbation seeds, so a seeds list samples distinct targets;
/// `alpha_identity` ignores the run seed entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConfig {
    AlphaIdentity {
        alpha: f64,
    },
    SpdSpectrum {
        eigenvalues: Vec<f64>,
        rotation_seed: u64,
    },
    NearSpd {
        base: Box<TargetConfig>,
        rho: f64,
        perturbation_seed: u64,
    },
}

impl TargetConfig {
    /// Builds the validated target recipe, offsetting every seed by the run
    /// seed.
    ///
    /// # Errors
    /// Propagates recipe validation failures.
    pub fn to_spec(&self, dim: usize, seed: u64) -> Result<TargetSpec> {
        let kind = match self {
            TargetConfig::AlphaIdentity { alpha } => TargetKind::AlphaIdentity { alpha: *alpha },
            TargetConfig::SpdSpectrum {
                eigenvalues,
                rotation_seed,
            } => TargetKind::SpdSpectrum {
                eigenvalues: eigenvalues.clone(),
                rotation_seed: rotation_seed.wrapping_add(seed),
            },
            TargetConfig::NearSpd {
                base,
                rho,
                perturbation_seed,
            } => TargetKind::NearSpd {
                base: Box::new(base.to_spec(dim, seed)?),
                rho: *rho,
                perturbation_seed: perturbation_seed.wrapping_add(seed),
            },
        };
        TargetSpec::new(kind, dim)
    }
}

fn default_dln_target() -> TargetConfig {
    TargetConfig::AlphaIdentity { alpha: 2.0 }
}

/// Deep linear network experiment.
///
/// Defaults: `l=4`, `d=4`, target `alpha_identity(2)`, identity init, mode
/// `swe`, `steps=100000`, `untie=steps`, full-sharing shape `1 x l`,
/// `eta="auto"`, `stop_rel=1e-10`, `record_every=1`, `check_bounds=true`,
/// `seeds=[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlnConfig {
    pub experiment: String,
    #[serde(default = "four")]
    pub l: usize,
    #[serde(default = "four")]
    pub d: usize,
    #[serde(default = "default_dln_target")]
    pub target: TargetConfig,
    #[serde(default = "default_init")]
    pub init: InitConfig,
    #[serde(default = "default_mode")]
    pub mode: SweMode,
    #[serde(default = "default_dln_steps")]
    pub steps: usize,
    #[serde(default)]
    pub untie: Option<usize>,
    #[serde(default)]
    pub unit_size: Option<usize>,
    #[serde(default)]
    pub repeat_count: Option<usize>,
    #[serde(default = "default_auto")]
    pub eta: EtaPolicy,
    #[serde(default = "default_stop_rel")]
    pub stop_rel: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "default_true")]
    pub check_bounds: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for DlnConfig {
    fn default() -> Self {
        serde_json::from_str(r#"{"experiment": "dln"}"#).expect("defaults fill every field")
    }
}

/// Overparameterized linear regression experiment (always trains the sharing
/// schedule and the plain-GD baseline side by side).
///
/// Defaults: `l=200`, `n=120`, `n_test=1000`, `steps=500`, `untie=100`,
/// `eta="auto"`, `seeds=[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressConfig {
    pub experiment: String,
    #[serde(default = "default_regress_l")]
    pub l: usize,
    #[serde(default = "default_regress_n")]
    pub n: usize,
    #[serde(default = "default_regress_n_test")]
    pub n_test: usize,
    #[serde(default = "default_regress_steps")]
    pub steps: usize,
    #[serde(default = "default_regress_untie")]
    pub untie: usize,
    #[serde(default = "default_auto")]
    pub eta: EtaPolicy,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for RegressConfig {
    fn default() -> Self {
        serde_json::from_str(r#"{"experiment": "regress"}"#).expect("defaults fill every field")
    }
}

/// Residual tanh stack experiment.
///
/// Defaults: `l=8`, `d=16`, `n_train=256`, `n_test=256`, `batch=32`,
/// `steps=2000`, `untie=steps/10`, full-sharing shape `1 x l`, `eta=0.05`,
/// `record_every=10`, `teacher_seed=1000`, `seeds=[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackedConfig {
    pub experiment: String,
    #[serde(default = "eight")]
    pub l: usize,
    #[serde(default = "sixteen")]
    pub d: usize,
    #[serde(default = "default_stacked_samples")]
    pub n_train: usize,
    #[serde(default = "default_stacked_samples")]
    pub n_test: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_stacked_steps")]
    pub steps: usize,
    #[serde(default)]
    pub untie: Option<usize>,
    #[serde(default)]
    pub unit_size: Option<usize>,
    #[serde(default)]
    pub repeat_count: Option<usize>,
    #[serde(default = "default_stacked_eta")]
    pub eta: EtaPolicy,
    #[serde(default = "ten")]
    pub record_every: usize,
    #[serde(default = "default_teacher_seed")]
    pub teacher_seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for StackedConfig {
    fn default() -> Self {
        serde_json::from_str(r#"{"experiment": "stacked"}"#).expect("defaults fill every field")
    }
}

/// Untie-point and grouping sweeps over one stacked task.
///
/// Defaults: task fields as in `stacked`; `fractions=[0,0.05,0.1,0.2,0.5,1]`,
/// `shapes=["8x1","4x2","2x4","1x8"]`, `reps=10`, `untie=steps/10` (for the
/// grouping sweep), `record_every=steps` (finals only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: String,
    #[serde(default = "eight")]
    pub l: usize,
    #[serde(default = "sixteen")]
    pub d: usize,
    #[serde(default = "default_stacked_samples")]
    pub n_train: usize,
    #[serde(default = "default_stacked_samples")]
    pub n_test: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_stacked_steps")]
    pub steps: usize,
    #[serde(default)]
    pub untie: Option<usize>,
    #[serde(default = "default_stacked_eta")]
    pub eta: EtaPolicy,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<String>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default = "default_teacher_seed")]
    pub teacher_seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        serde_json::from_str(r#"{"experiment": "sweep"}"#).expect("defaults fill every field")
    }
}

impl SweepConfig {
    /// Parses the `"AxB"` shape spellings.
    ///
    /// # Errors
    /// Fails listing every malformed shape.
    pub fn parsed_shapes(&self) -> Result<Vec<(usize, usize)>> {
        let mut shapes = Vec::with_capacity(self.shapes.len());
        let mut bad = Vec::new();
        for text in &self.shapes {
            match parse_shape(text) {
                Some(pair) => shapes.push(pair),
                None => bad.push(format!("shapes entry {text:?} is not of the form AxB")),
            }
        }
        if bad.is_empty() {
            Ok(shapes)
        } else {
            Err(Error::Config(bad))
        }
    }
}

fn parse_shape(text: &str) -> Option<(usize, usize)> {
    let (a, b) = text.split_once('x')?;
    let a: usize = a.trim().parse().ok()?;
    let b: usize = b.trim().parse().ok()?;
    Some((a, b))
}

/// Stem-error scaling scan over a grid of regression sizes.
///
/// Defaults: `l_grid=[50,100,200,400]`, `n_grid=[25,50,100,200]`,
/// `seeds=0..20`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub experiment: String,
    #[serde(default = "default_l_grid")]
    pub l_grid: Vec<usize>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_scan_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        serde_json::from_str(r#"{"experiment": "scan"}"#).expect("defaults fill every field")
    }
}

fn one() -> usize {
    1
}
fn four() -> usize {
    4
}
fn eight() -> usize {
    8
}
fn ten() -> usize {
    10
}
fn sixteen() -> usize {
    16
}
fn default_init() -> InitConfig {
    InitConfig::Identity
}
fn default_mode() -> SweMode {
    SweMode::Swe
}
fn default_dln_steps() -> usize {
    100_000
}
fn default_auto() -> EtaPolicy {
    EtaPolicy::Auto
}
fn default_stop_rel() -> f64 {
    1e-10
}
fn default_true() -> bool {
    true
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_regress_l() -> usize {
    200
}
fn default_regress_n() -> usize {
    120
}
fn default_regress_n_test() -> usize {
    1000
}
fn default_regress_steps() -> usize {
    500
}
fn default_regress_untie() -> usize {
    100
}
fn default_stacked_samples() -> usize {
    256
}
fn default_batch() -> usize {
    32
}
fn default_stacked_steps() -> usize {
    2000
}
fn default_stacked_eta() -> EtaPolicy {
    EtaPolicy::Fixed(0.05)
}
fn default_teacher_seed() -> u64 {
    1000
}
fn default_fractions() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0]
}
fn default_shapes() -> Vec<String> {
    vec!["8x1".into(), "4x2".into(), "2x4".into(), "1x8".into()]
}
fn default_reps() -> usize {
    10
}
fn default_l_grid() -> Vec<usize> {
    vec![50, 100, 200, 400]
}
fn default_n_grid() -> Vec<usize> {
    vec![25, 50, 100, 200]
}
fn default_scan_seeds() -> Vec<u64> {
    (0..20).collect()
}

/// One experiment of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Dln(DlnConfig),
    Regress(RegressConfig),
    Stacked(StackedConfig),
    Sweep(SweepConfig),
    Scan(ScanConfig),
}

pub const EXPERIMENT_KINDS: [&str; 5] = ["dln", "regress", "stacked", "sweep", "scan"];

impl ExperimentConfig {
    /// The experiment tag this config dispatches to.
    #[must_use]
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Dln(_) => "dln",
            ExperimentConfig::Regress(_) => "regress",
            ExperimentConfig::Stacked(_) => "stacked",
            ExperimentConfig::Sweep(_) => "sweep",
            ExperimentConfig::Scan(_) => "scan",
        }
    }

    /// All defaults for the given experiment kind.
    ///
    /// # Errors
    /// Fails on an unknown kind.
    pub fn default_for(kind: &str) -> Result<Self> {
        match kind {
            "dln" => Ok(ExperimentConfig::Dln(DlnConfig::default())),
            "regress" => Ok(ExperimentConfig::Regress(RegressConfig::default())),
            "stacked" => Ok(ExperimentConfig::Stacked(StackedConfig::default())),
            "sweep" => Ok(ExperimentConfig::Sweep(SweepConfig::default())),
            "scan" => Ok(ExperimentConfig::Scan(ScanConfig::default())),
            other => Err(Error::Config(vec![format!(
                "unknown experiment {other:?}; expected one of {EXPERIMENT_KINDS:?}"
            )])),
        }
    }

    #[must_use]
    pub fn out_dir(&self) -> Option<&str> {
        match self {
            ExperimentConfig::Dln(c) => c.out_dir.as_deref(),
            ExperimentConfig::Regress(c) => c.out_dir.as_deref(),
            ExperimentConfig::Stacked(c) => c.out_dir.as_deref(),
            ExperimentConfig::Sweep(c) => c.out_dir.as_deref(),
            ExperimentConfig::Scan(c) => c.out_dir.as_deref(),
        }
    }

    /// Canonical JSON echo of the config (field order fixed by declaration).
    #[must_use]
    pub fn canonical_json(&self) -> String {
        match self {
            ExperimentConfig::Dln(c) => serde_json::to_string_pretty(c),
            ExperimentConfig::Regress(c) => serde_json::to_string_pretty(c),
            ExperimentConfig::Stacked(c) => serde_json::to_string_pretty(c),
            ExperimentConfig::Sweep(c) => serde_json::to_string_pretty(c),
            ExperimentConfig::Scan(c) => serde_json::to_string_pretty(c),
        }
        .expect("plain data serializes")
    }

    /// Checks every constraint, collecting all violations.
    ///
    /// # Errors
    /// [`Error::Config`] listing each violated constraint with its fields.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        match self {
            ExperimentConfig::Dln(c) => validate_dln(c, &mut v),
            ExperimentConfig::Regress(c) => validate_regress(c, &mut v),
            ExperimentConfig::Stacked(c) => validate_stacked(c, &mut v),
            ExperimentConfig::Sweep(c) => validate_sweep(c, &mut v),
            ExperimentConfig::Scan(c) => validate_scan(c, &mut v),
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Applies CLI flag overrides, rejecting flags the experiment does not
    /// define.
    ///
    /// # Errors
    /// [`Error::Config`] listing each inapplicable flag.
    pub fn apply_overrides(&mut self, ov: &Overrides) -> Result<()> {
        let mut bad = Vec::new();
        let kind = self.kind();
        macro_rules! reject {
            ($field:expr, $name:literal) => {
                if $field {
                    bad.push(format!("--{} does not apply to {kind}", $name));
                }
            };
        }
        match self {
            ExperimentConfig::Dln(c) => {
                apply(&mut c.l, ov.l);
                apply(&mut c.d, ov.d);
                apply(&mut c.steps, ov.steps);
                apply_opt(&mut c.untie, ov.untie);
                apply(&mut c.eta, ov.eta);
                apply_seeds(&mut c.seeds, &ov.seeds);
                apply_opt(&mut c.out_dir, ov.out.clone());
            }
            ExperimentConfig::Regress(c) => {
                reject!(ov.d.is_some(), "d");
                apply(&mut c.l, ov.l);
                apply(&mut c.steps, ov.steps);
                apply(&mut c.untie, ov.untie);
                apply(&mut c.eta, ov.eta);
                apply_seeds(&mut c.seeds, &ov.seeds);
                apply_opt(&mut c.out_dir, ov.out.clone());
            }
            ExperimentConfig::Stacked(c) => {
                apply(&mut c.l, ov.l);
                apply(&mut c.d, ov.d);
                apply(&mut c.steps, ov.steps);
                apply_opt(&mut c.untie, ov.untie);
                apply(&mut c.eta, ov.eta);
                apply_seeds(&mut c.seeds, &ov.seeds);
                apply_opt(&mut c.out_dir, ov.out.clone());
            }
            ExperimentConfig::Sweep(c) => {
                reject!(!ov.seeds.is_empty(), "seed");
                apply(&mut c.l, ov.l);
                apply(&mut c.d, ov.d);
                apply(&mut c.steps, ov.steps);
                apply_opt(&mut c.untie, ov.untie);
                apply(&mut c.eta, ov.eta);
                apply_opt(&mut c.out_dir, ov.out.clone());
            }
            ExperimentConfig::Scan(c) => {
                reject!(ov.l.is_some(), "L");
                reject!(ov.d.is_some(), "d");
                reject!(ov.steps.is_some(), "steps");
                reject!(ov.untie.is_some(), "untie");
                reject!(ov.eta.is_some(), "eta");
                apply_seeds(&mut c.seeds, &ov.seeds);
                apply_opt(&mut c.out_dir, ov.out.clone());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }
}

/// CLI flag overrides, all optional.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub l: Option<usize>,
    pub d: Option<usize>,
    pub steps: Option<usize>,
    pub untie: Option<usize>,
    pub eta: Option<EtaPolicy>,
    pub seeds: Vec<u64>,
    pub out: Option<String>,
}

fn apply<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_seeds(slot: &mut Vec<u64>, seeds: &[u64]) {
    if !seeds.is_empty() {
        *slot = seeds.to_vec();
    }
}

fn check_positive(v: &mut Vec<String>, value: usize, field: &str) {
    if value == 0 {
        v.push(format!("{field} must be positive"));
    }
}

fn check_seeds(v: &mut Vec<String>, seeds: &[u64]) {
    if seeds.is_empty() {
        v.push("seeds must not be empty".into());
    }
}

fn check_eta(v: &mut Vec<String>, eta: EtaPolicy, allow_auto: bool) {
    match eta {
        EtaPolicy::Auto if !allow_auto => {
            v.push("eta \"auto\" is not defined for this experiment; give a number".into());
        }
        EtaPolicy::Fixed(x) if !x.is_finite() || x <= 0.0 => {
            v.push(format!("eta {x} must be finite and positive"));
        }
        _ => {}
    }
}

fn check_untie(v: &mut Vec<String>, untie: usize, steps: usize) {
    if untie > steps {
        v.push(format!("untie {untie} exceeds steps {steps}; untie must be <= steps"));
    }
}

fn check_shape(v: &mut Vec<String>, unit: Option<usize>, repeat: Option<usize>, l: usize) {
    match (unit, repeat) {
        (None, None) => {}
        (Some(a), Some(b)) => {
            if a * b != l {
                v.push(format!(
                    "sharing shape unit_size {a} x repeat_count {b} does not cover l = {l}"
                ));
            }
        }
        _ => v.push("unit_size and repeat_count must be given together".into()),
    }
}

fn validate_dln(c: &DlnConfig, v: &mut Vec<String>) {
    check_positive(v, c.l, "l");
    check_positive(v, c.d, "d");
    check_positive(v, c.steps, "steps");
    check_positive(v, c.record_every, "record_every");
    check_untie(v, c.untie.unwrap_or(c.steps), c.steps);
    check_shape(v, c.unit_size, c.repeat_count, c.l);
    check_eta(v, c.eta, true);
    if !(c.stop_rel > 0.0 && c.stop_rel <= 1.0) {
        v.push(format!("stop_rel {} must lie in (0, 1]", c.stop_rel));
    }
    check_seeds(v, &c.seeds);
    if c.d > 0 {
        if let Err(Error::InvalidArgument(msg)) = c.target.to_spec(c.d, 0) {
            v.push(format!("target: {msg}"));
        }
    }
}

fn validate_regress(c: &RegressConfig, v: &mut Vec<String>) {
    check_positive(v, c.l, "l");
    check_positive(v, c.n, "n");
    check_positive(v, c.n_test, "n_test");
    check_positive(v, c.steps, "steps");
    check_untie(v, c.untie, c.steps);
    check_eta(v, c.eta, true);
    check_seeds(v, &c.seeds);
}

fn validate_stacked(c: &StackedConfig, v: &mut Vec<String>) {
    check_positive(v, c.l, "l");
    check_positive(v, c.d, "d");
    check_positive(v, c.n_train, "n_train");
    check_positive(v, c.n_test, "n_test");
    check_positive(v, c.batch, "batch");
    check_positive(v, c.steps, "steps");
    check_positive(v, c.record_every, "record_every");
    check_untie(v, c.untie.unwrap_or(0), c.steps);
    check_shape(v, c.unit_size, c.repeat_count, c.l);
    check_eta(v, c.eta, false);
    check_seeds(v, &c.seeds);
}

fn validate_sweep(c: &SweepConfig, v: &mut Vec<String>) {
    check_positive(v, c.l, "l");
    check_positive(v, c.d, "d");
    check_positive(v, c.n_train, "n_train");
    check_positive(v, c.n_test, "n_test");
    check_positive(v, c.batch, "batch");
    check_positive(v, c.steps, "steps");
    check_positive(v, c.reps, "reps");
    check_untie(v, c.untie.unwrap_or(0), c.steps);
    check_eta(v, c.eta, false);
    if let Some(stride) = c.record_every {
        check_positive(v, stride, "record_every");
    }
    if c.fractions.is_empty() {
        v.push("fractions must not be empty".into());
    }
    for f in &c.fractions {
        if !(0.0..=1.0).contains(f) {
            v.push(format!("fractions entry {f} must lie in [0, 1]"));
        }
    }
    if !c.fractions.is_empty()
        && (!c.fractions.contains(&0.0) || !c.fractions.contains(&1.0))
    {
        v.push("fractions must include 0 and 1 (the never/always-shared baselines)".into());
    }
    match c.parsed_shapes() {
        Err(Error::Config(msgs)) => v.extend(msgs),
        Err(_) => unreachable!("parsed_shapes only yields config errors"),
        Ok(shapes) => {
            if shapes.is_empty() {
                v.push("shapes must not be empty".into());
            }
            for (text, (a, b)) in c.shapes.iter().zip(shapes) {
                if a * b != c.l {
                    v.push(format!("shapes entry {text:?} does not cover l = {}", c.l));
                }
            }
        }
    }
}

fn validate_scan(c: &ScanConfig, v: &mut Vec<String>) {
    if c.l_grid.is_empty() {
        v.push("l_grid must not be empty".into());
    }
    if c.n_grid.is_empty() {
        v.push("n_grid must not be empty".into());
    }
    for &l in &c.l_grid {
        if l == 0 {
            v.push("l_grid entries must be positive".into());
            break;
        }
    }
    for &n in &c.n_grid {
        if n == 0 {
            v.push("n_grid entries must be positive".into());
            break;
        }
    }
    check_seeds(v, &c.seeds);
}

/// Parses a config document: the `experiment` tag first, then the full
/// strict shape.
///
/// # Errors
/// [`Error::Config`] for malformed JSON, an unknown experiment, or unknown
/// fields; validation is a separate step.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    #[derive(Deserialize)]
    struct Tag {
        experiment: String,
    }
    let tag: Tag = serde_json::from_str(text)
        .map_err(|e| Error::Config(vec![format!("config is not valid JSON with an \"experiment\" field: {e}")]))?;
    let strict = |e: serde_json::Error| Error::Config(vec![format!("config for {:?}: {e}", tag.experiment)]);
    match tag.experiment.as_str() {
        "dln" => Ok(ExperimentConfig::Dln(serde_json::from_str(text).map_err(strict)?)),
        "regress" => Ok(ExperimentConfig::Regress(serde_json::from_str(text).map_err(strict)?)),
        "stacked" => Ok(ExperimentConfig::Stacked(serde_json::from_str(text).map_err(strict)?)),
        "sweep" => Ok(ExperimentConfig::Sweep(serde_json::from_str(text).map_err(strict)?)),
        "scan" => Ok(ExperimentConfig::Scan(serde_json::from_str(text).map_err(strict)?)),
        other => Err(Error::Config(vec![format!(
            "unknown experiment {other:?}; expected one of {EXPERIMENT_KINDS:?}"
        )])),
    }
}

/// Reads and parses a config file, then validates it.
///
/// # Errors
/// I/O, parse, and validation failures (the latter listing every violation).
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config = parse_config(&text)?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_dln_config_fills_documented_defaults() {
        let cfg = parse_config(r#"{"experiment": "dln"}"#).unwrap();
        let ExperimentConfig::Dln(c) = &cfg else { panic!("wrong kind") };
        assert_eq!((c.l, c.d, c.steps), (4, 4, 100_000));
        assert_eq!(c.target, TargetConfig::AlphaIdentity { alpha: 2.0 });
        assert_eq!(c.init, InitConfig::Identity);
        assert_eq!(c.mode, SweMode::Swe);
        assert_eq!(c.untie, None);
        assert_eq!(c.eta, EtaPolicy::Auto);
        assert_eq!(c.seeds, vec![0]);
        assert!(c.check_bounds);
        cfg.validate().unwrap();
    }

    #[test]
    fn defaults_round_trip_for_every_kind() {
        for kind in EXPERIMENT_KINDS {
            let cfg = ExperimentConfig::default_for(kind).unwrap();
            let reloaded = parse_config(&cfg.canonical_json()).unwrap();
            assert_eq!(cfg, reloaded, "{kind}");
        }
    }

    #[test]
    fn untie_past_steps_rejected_naming_both_fields() {
        let cfg = parse_config(r#"{"experiment": "regress", "untie": 600, "steps": 500}"#).unwrap();
        let err = cfg.validate().unwrap_err();
        let Error::Config(v) = err else { panic!("wrong error kind") };
        assert!(v[0].contains("untie") && v[0].contains("steps"), "{v:?}");
    }

    #[test]
    fn unknown_fields_rejected_with_the_key() {
        let err = parse_config(r#"{"experiment": "dln", "stepz": 10}"#).unwrap_err();
        let Error::Config(v) = err else { panic!("wrong error kind") };
        assert!(v[0].contains("stepz"), "{v:?}");
    }

    #[test]
    fn unknown_experiment_rejected() {
        let err = parse_config(r#"{"experiment": "bert"}"#).unwrap_err();
        let Error::Config(v) = err else { panic!("wrong error kind") };
        assert!(v[0].contains("bert"));
    }

    #[test]
    fn validation_collects_every_violation() {
        let cfg = parse_config(
            r#"{"experiment": "dln", "l": 0, "steps": 0, "seeds": [], "stop_rel": 2.0}"#,
        )
        .unwrap();
        let Error::Config(v) = cfg.validate().unwrap_err() else { panic!("wrong error kind") };
        assert!(v.len() >= 4, "{v:?}");
    }

    #[test]
    fn eta_accepts_auto_and_numbers_only() {
        let auto = parse_config(r#"{"experiment": "dln", "eta": "auto"}"#).unwrap();
        let ExperimentConfig::Dln(c) = auto else { panic!() };
        assert_eq!(c.eta, EtaPolicy::Auto);

        let fixed = parse_config(r#"{"experiment": "dln", "eta": 0.125}"#).unwrap();
        let ExperimentConfig::Dln(c) = fixed else { panic!() };
        assert_eq!(c.eta, EtaPolicy::Fixed(0.125));

        assert!(parse_config(r#"{"experiment": "dln", "eta": "fast"}"#).is_err());
        assert_eq!(EtaPolicy::parse_cli("auto").unwrap(), EtaPolicy::Auto);
        assert_eq!(EtaPolicy::parse_cli("0.5").unwrap(), EtaPolicy::Fixed(0.5));
        assert!(EtaPolicy::parse_cli("quick").is_err());
    }

    #[test]
    fn stacked_rejects_auto_eta() {
        let cfg = parse_config(r#"{"experiment": "stacked", "eta": "auto"}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_fraction_and_shape_constraints() {
        let missing_end = parse_config(r#"{"experiment": "sweep", "fractions": [0.0, 0.5]}"#).unwrap();
        assert!(missing_end.validate().is_err());

        let bad_shape = parse_config(r#"{"experiment": "sweep", "shapes": ["3x2"]}"#).unwrap();
        let Error::Config(v) = bad_shape.validate().unwrap_err() else { panic!() };
        assert!(v[0].contains("3x2"), "{v:?}");

        let junk_shape = parse_config(r#"{"experiment": "sweep", "shapes": ["axb"]}"#).unwrap();
        assert!(junk_shape.validate().is_err());
    }

    #[test]
    fn target_config_seed_offsets_only_random_targets() {
        let fixed = TargetConfig::AlphaIdentity { alpha: 2.0 };
        assert_eq!(
            fixed.to_spec(4, 0).unwrap().build().unwrap(),
            fixed.to_spec(4, 9).unwrap().build().unwrap()
        );

        let random = TargetConfig::SpdSpectrum {
            eigenvalues: vec![0.5, 1.0, 1.5, 2.0],
            rotation_seed: 0,
        };
        assert_ne!(
            random.to_spec(4, 0).unwrap().build().unwrap(),
            random.to_spec(4, 9).unwrap().build().unwrap()
        );
    }

    #[test]
    fn overrides_apply_or_reject_per_kind() {
        let mut dln = ExperimentConfig::default_for("dln").unwrap();
        dln.apply_overrides(&Overrides {
            l: Some(6),
            d: Some(3),
            steps: Some(50),
            untie: Some(10),
            eta: Some(EtaPolicy::Fixed(0.1)),
            seeds: vec![4, 5],
            out: Some("elsewhere".into()),
        })
        .unwrap();
        let ExperimentConfig::Dln(c) = &dln else { panic!() };
        assert_eq!((c.l, c.d, c.steps, c.untie), (6, 3, 50, Some(10)));
        assert_eq!(c.seeds, vec![4, 5]);
        assert_eq!(c.out_dir.as_deref(), Some("elsewhere"));

        let mut regress = ExperimentConfig::default_for("regress").unwrap();
        let err = regress.apply_overrides(&Overrides { d: Some(4), ..Overrides::default() });
        let Error::Config(v) = err.unwrap_err() else { panic!() };
        assert!(v[0].contains("--d") && v[0].contains("regress"), "{v:?}");

        let mut scan = ExperimentConfig::default_for("scan").unwrap();
        let err = scan.apply_overrides(&Overrides {
            steps: Some(10),
            eta: Some(EtaPolicy::Auto),
            ..Overrides::default()
        });
        let Error::Config(v) = err.unwrap_err() else { panic!() };
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn load_config_reads_files_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.json");
        std::fs::write(&good, r#"{"experiment": "scan", "l_grid": [10], "n_grid": [5], "seeds": [0]}"#).unwrap();
        assert!(load_config(&good).is_ok());

        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, r#"{"experiment": "scan", "seeds": []}"#).unwrap();
        assert!(load_config(&bad).is_err());

        assert!(load_config(&dir.path().join("missing.json")).is_err());
    }
}
