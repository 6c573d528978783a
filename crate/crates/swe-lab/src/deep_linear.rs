//! Deep linear networks `f(x) = W_L ... W_1 x` trained against a target
//! matrix under the Frobenius objective `R = 0.5 * ||W_L...W_1 - Phi||_F^2`.
//!
//! The module provides analytic gradients through cached prefix/suffix
//! products, the classical identity and zero-asymmetric initializations,
//! theory-prescribed step sizes, trainers (single-phase and the two-phase
//! symmetric-stem pipeline), and checkers for per-step contraction, loss
//! bounds, and eigenvalue envelopes.

use crate::core_math::eigen::{sigma_min, spd_extremes, sym_eig, MAX_EIG_DIM};
use crate::core_math::matrix::Matrix;
use crate::core_math::rng::{gaussian_matrix, Rng};
use crate::error::{Error, Result};
use crate::swe_optim::{apply_schedule, sgd_step, GradientSet, LearningRate, SweSchedule};
use crate::trace::Trace;

/// Loss above which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Column layout of deep-linear run traces. Row `t` describes the state after
/// `t` updates; row 0 is the initialization. The stem columns are filled only
/// while all layers are bit-identical and the shared stem is symmetric.
pub const DLN_TRACE_COLUMNS: [&str; 6] = [
    "step",
    "loss",
    "bound",
    "lambda_min_stem",
    "lambda_max_stem",
    "grad_norm_mean",
];

// ---------------------------------------------------------------------------
// Target construction
// ---------------------------------------------------------------------------

/// Recipe for the target matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetKind {
    /// `alpha * I`.
    AlphaIdentity { alpha: f64 },
    /// `Q diag(eigenvalues) Q^T` with `Q` a seeded random rotation.
    SpdSpectrum { eigenvalues: Vec<f64>, rotation_seed: u64 },
    /// SPD base plus a seeded perturbation of Frobenius norm
    /// `rho * sigma_min(base)`.
    NearSpd {
        base: Box<TargetSpec>,
        rho: f64,
        perturbation_seed: u64,
    },
}

/// Validated target recipe of a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    kind: TargetKind,
    dim: usize,
}

impl TargetSpec {
    /// Validates the recipe: positive dimension, strictly positive spectrum
    /// for `SpdSpectrum` (with one eigenvalue per dimension), `rho <= 1/3`
    /// and an SPD-producing base for `NearSpd`.
    ///
    /// # Errors
    /// Fails with a message naming the violated constraint.
    pub fn new(kind: TargetKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("target dimension must be positive".into()));
        }
        match &kind {
            TargetKind::AlphaIdentity { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::InvalidArgument(format!("alpha {alpha} must be finite")));
                }
            }
            TargetKind::SpdSpectrum { eigenvalues, .. } => {
                if eigenvalues.len() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "spd_spectrum lists {} eigenvalues for dimension {dim}",
                        eigenvalues.len()
                    )));
                }
                if let Some(bad) = eigenvalues.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "spd_spectrum eigenvalue {bad} must be strictly positive"
                    )));
                }
            }
            TargetKind::NearSpd { base, rho, .. } => {
                if !(*rho >= 0.0 && *rho <= 1.0 / 3.0) {
                    return Err(Error::InvalidArgument(format!(
                        "near_spd rho {rho} outside [0, 1/3]"
                    )));
                }
                if base.dim != dim {
                    return Err(Error::InvalidArgument(format!(
                        "near_spd base dimension {} differs from {dim}",
                        base.dim
                    )));
                }
                if matches!(base.kind, TargetKind::NearSpd { .. }) {
                    return Err(Error::InvalidArgument(
                        "near_spd base must itself be positive definite, not another near_spd".into(),
                    ));
                }
                if let TargetKind::AlphaIdentity { alpha } = base.kind {
                    if alpha <= 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "near_spd base alpha {alpha} must be positive"
                        )));
                    }
                }
            }
        }
        Ok(TargetSpec { kind, dim })
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[must_use]
    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    /// Materializes the target matrix.
    ///
    /// # Errors
    /// Propagates eigensolver failures (oversized dimension, degenerate
    /// rotation sample).
    pub fn build(&self) -> Result<Matrix> {
        match &self.kind {
            TargetKind::AlphaIdentity { alpha } => Ok(Matrix::identity(self.dim).scaled(*alpha)),
            TargetKind::SpdSpectrum {
                eigenvalues,
                rotation_seed,
            } => {
                let q = random_orthogonal(self.dim, *rotation_seed)?;
                let mut lambda = Matrix::zeros(self.dim, self.dim);
                for (i, &e) in eigenvalues.iter().enumerate() {
                    lambda.set(i, i, e);
                }
                q.matmul(&lambda)?.matmul(&q.transpose())
            }
            TargetKind::NearSpd {
                base,
                rho,
                perturbation_seed,
            } => {
                let phi0 = base.build()?;
                let smin = sigma_min(&phi0)?;
                let mut rng = Rng::new(*perturbation_seed);
                let raw = gaussian_matrix(self.dim, self.dim, 0.0, 1.0, &mut rng)?;
                let norm = raw.frob_norm();
                if norm == 0.0 {
                    return Err(Error::InvalidArgument("degenerate perturbation sample".into()));
                }
                let scaled = raw.scaled(rho * smin / norm);
                phi0.add(&scaled)
            }
        }
    }
}

/// Random orthogonal matrix: Gram–Schmidt on a seeded Gaussian sample.
fn random_orthogonal(dim: usize, seed: u64) -> Result<Matrix> {
    let mut rng = Rng::new(seed);
    let g = gaussian_matrix(dim, dim, 0.0, 1.0, &mut rng)?;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut v: Vec<f64> = (0..dim).map(|i| g.get(i, j)).collect();
        for u in &cols {
            let dot: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u.iter()) {
                *vi -= dot * ui;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "rotation sample for seed {seed} is numerically rank deficient"
            )));
        }
        for vi in &mut v {
            *vi /= norm;
        }
        cols.push(v);
    }
    let mut q = Matrix::zeros(dim, dim);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            q.set(i, j, v);
        }
    }
    Ok(q)
}

// ---------------------------------------------------------------------------
// Network state
// ---------------------------------------------------------------------------

/// Initialization family for the layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlnInit {
    /// Every layer is the identity.
    Identity,
    /// Identity everywhere except the last layer, which is zero.
    Zas,
}

/// The L-layer network, its target, and cached prefix/suffix products.
///
/// `prefix[l] = W_l ... W_1` (so `prefix[0] = I`) and
/// `suffix[l] = W_L ... W_{l+1}` (so `suffix[L] = I`); both are refreshed in
/// full after every update.
#[derive(Debug, Clone)]
pub struct DlnState {
    layers: Vec<Matrix>,
    target: Matrix,
    prefix: Vec<Matrix>,
    suffix: Vec<Matrix>,
}

impl DlnState {
    /// Wraps explicit layers and a target after shape validation.
    ///
    /// # Errors
    /// Fails when layers are missing, non-square, or inconsistent with the
    /// target dimension.
    pub fn new(layers: Vec<Matrix>, target: Matrix) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        let d = target.rows();
        if !target.is_square() {
            return Err(Error::InvalidArgument(format!(
                "target must be square, got {}x{}",
                target.rows(),
                target.cols()
            )));
        }
        for (l, w) in layers.iter().enumerate() {
            if w.rows() != d || w.cols() != d {
                return Err(Error::InvalidArgument(format!(
                    "layer {} is {}x{}, target dimension is {d}",
                    l + 1,
                    w.rows(),
                    w.cols()
                )));
            }
        }
        let mut state = DlnState {
            layers,
            target,
            prefix: Vec::new(),
            suffix: Vec::new(),
        };
        state.refresh()?;
        Ok(state)
    }

    /// Fresh state from a standard initialization.
    ///
    /// # Errors
    /// Propagates [`DlnState::new`] validation.
    pub fn from_init(init: DlnInit, depth: usize, target: Matrix) -> Result<Self> {
        let d = target.rows();
        let layers = match init {
            DlnInit::Identity => vec![Matrix::identity(d); depth],
            DlnInit::Zas => {
                let mut ws = vec![Matrix::identity(d); depth];
                ws[depth - 1] = Matrix::zeros(d, d);
                ws
            }
        };
        DlnState::new(layers, target)
    }

    /// Recomputes every prefix and suffix product from scratch.
    ///
    /// # Errors
    /// Fails if a product produces non-finite entries.
    pub fn refresh(&mut self) -> Result<()> {
        let l = self.layers.len();
        let d = self.dim();
        let mut prefix = Vec::with_capacity(l + 1);
        prefix.push(Matrix::identity(d));
        for w in &self.layers {
            let next = w.matmul(prefix.last().expect("nonempty"))?;
            prefix.push(next);
        }
        let mut suffix = vec![Matrix::identity(d); l + 1];
        for i in (0..l).rev() {
            suffix[i] = suffix[i + 1].matmul(&self.layers[i])?;
        }
        if !prefix[l].is_finite() {
            return Err(Error::NonFinite {
                context: "layer product",
                layer: l,
            });
        }
        self.prefix = prefix;
        self.suffix = suffix;
        Ok(())
    }

    #[must_use]
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.target.rows()
    }

    #[must_use]
    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    #[must_use]
    pub fn target(&self) -> &Matrix {
        &self.target
    }

    /// Cached full product `W_L ... W_1`.
    #[must_use]
    pub fn product(&self) -> &Matrix {
        &self.prefix[self.layers.len()]
    }

    /// Objective value `0.5 * ||product - target||_F^2`.
    #[must_use]
    pub fn loss(&self) -> f64 {
        let diff = self.product().sub(&self.target).expect("matching shapes");
        0.5 * diff.frob_inner(&diff).expect("matching shapes")
    }

    /// Analytic per-layer gradients from the cached products:
    /// `grad_l = suffix[l]^T (product - target) prefix[l-1]^T`.
    ///
    /// # Errors
    /// Propagates shape errors (impossible for a validated state).
    pub fn grads(&self) -> Result<GradientSet> {
        let err = self.product().sub(&self.target)?;
        let l = self.layers.len();
        let mut grads = Vec::with_capacity(l);
        for idx in 1..=l {
            let left = self.suffix[idx].transpose();
            let right = self.prefix[idx - 1].transpose();
            grads.push(left.matmul(&err)?.matmul(&right)?);
        }
        GradientSet::new(grads)
    }

    /// Applies one gradient step and refreshes the caches.
    ///
    /// # Errors
    /// Propagates non-finite gradients and refresh failures.
    pub fn step_with(&mut self, g: &GradientSet, eta: f64) -> Result<()> {
        sgd_step(&mut self.layers, g, eta)?;
        self.refresh()
    }

    /// True when every layer is bit-identical to the first.
    #[must_use]
    pub fn layers_all_equal(&self) -> bool {
        self.layers.iter().all(|w| *w == self.layers[0])
    }
}

// ---------------------------------------------------------------------------
// Theory-prescribed step sizes
// ---------------------------------------------------------------------------

/// Sharing-phase step-size bound `1 / (L * max(lambda_max^2, 1))`.
///
/// # Errors
/// Fails when `depth == 0` or the target is not symmetric positive definite.
pub fn eta_sharing_lemma(phi: &Matrix, depth: usize) -> Result<f64> {
    require_depth(depth)?;
    let (_, hi) = spd_extremes(phi)?;
    Ok(1.0 / (depth as f64 * (hi * hi).max(1.0)))
}

/// Discrete-time sharing bound
/// `min(lambda_min^2, 1) / (4 sqrt(d) L^2 max(lambda_max^4, 1))`.
///
/// # Errors
/// Fails when `depth == 0` or the target is not symmetric positive definite.
pub fn eta_sharing_discrete(phi: &Matrix, depth: usize) -> Result<f64> {
    require_depth(depth)?;
    let (lo, hi) = spd_extremes(phi)?;
    let d = phi.rows() as f64;
    let l = depth as f64;
    Ok((lo * lo).min(1.0) / (4.0 * d.sqrt() * l * l * (hi.powi(4)).max(1.0)))
}

/// Zero-asymmetric-initialization step-size bound
/// `min(1/(4 L^3 xi^6), 1/(144 L^2 xi^4))` with
/// `xi = max(2 ||Phi||_F, 3 / sqrt(L), 1)`.
///
/// # Errors
/// Fails when `depth == 0` or the target is not square.
pub fn eta_zas(phi: &Matrix, depth: usize) -> Result<f64> {
    require_depth(depth)?;
    if !phi.is_square() {
        return Err(Error::InvalidArgument(format!(
            "target must be square, got {}x{}",
            phi.rows(),
            phi.cols()
        )));
    }
    let l = depth as f64;
    let xi = (2.0 * phi.frob_norm()).max(3.0 / l.sqrt()).max(1.0);
    let cubic = 1.0 / (4.0 * l.powi(3) * xi.powi(6));
    let quadratic = 1.0 / (144.0 * l * l * xi.powi(4));
    Ok(cubic.min(quadratic))
}

fn require_depth(depth: usize) -> Result<()> {
    if depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    Ok(())
}

/// Steps guaranteed to reach `R <= target_rel * R(0)` under the discrete
/// sharing contraction `(1 - (2L-2) min(lambda_min^2,1) eta)^t` at
/// `eta = eta_sharing_discrete`.
///
/// # Errors
/// Fails for `depth < 2` (no contraction guarantee) or a non-SPD target.
pub fn shared_guarantee_steps(phi: &Matrix, depth: usize, target_rel: f64) -> Result<usize> {
    if depth < 2 {
        return Err(Error::InvalidArgument(
            "contraction guarantee needs depth >= 2".into(),
        ));
    }
    require_target_rel(target_rel)?;
    let eta = eta_sharing_discrete(phi, depth)?;
    let (lo, _) = spd_extremes(phi)?;
    let rate = (2 * depth - 2) as f64 * (lo * lo).min(1.0) * eta;
    Ok((target_rel.ln() / (1.0 - rate).ln()).ceil() as usize)
}

/// Steps guaranteed to reach `R <= target_rel * R(0)` under the ZAS bound
/// `(1 - eta/2)^t` at `eta = eta_zas`.
///
/// # Errors
/// Fails for `depth == 0` or `target_rel` outside `(0, 1)`.
pub fn zas_guarantee_steps(phi: &Matrix, depth: usize, target_rel: f64) -> Result<usize> {
    require_target_rel(target_rel)?;
    let eta = eta_zas(phi, depth)?;
    Ok((target_rel.ln() / (1.0 - eta / 2.0).ln()).ceil() as usize)
}

fn require_target_rel(target_rel: f64) -> Result<()> {
    if !(target_rel > 0.0 && target_rel < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "relative target {target_rel} must lie in (0, 1)"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Step-size policy for [`train_dln`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaChoice {
    /// Theory-prescribed: [`eta_sharing_discrete`] for identity
    /// initialization, [`eta_zas`] for ZAS.
    Auto,
    Fixed(f64),
}

/// Loss-based stopping threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossThreshold {
    RelativeToInitial(f64),
    Absolute(f64),
}

/// Stop when the loss falls below the threshold or `max_steps` updates ran.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_steps: usize,
    pub loss_threshold: LossThreshold,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_steps: 1_000_000,
            loss_threshold: LossThreshold::RelativeToInitial(1e-10),
        }
    }
}

/// Reference bound curve recorded in the trace's `bound` column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundCurve {
    /// `exp(-rate * t) * R(0)` — the sharing-phase envelope.
    SharedExp { rate: f64 },
    /// `(1 - eta/2)^t * R(0)` — the ZAS trajectory bound.
    ZasGeometric { eta: f64 },
    /// No reference curve; the column stays empty.
    None,
}

impl BoundCurve {
    fn value(&self, step: usize, initial_loss: f64) -> Option<f64> {
        match self {
            BoundCurve::SharedExp { rate } => Some((-rate * step as f64).exp() * initial_loss),
            BoundCurve::ZasGeometric { eta } => Some((1.0 - eta / 2.0).powi(step as i32) * initial_loss),
            BoundCurve::None => None,
        }
    }
}

/// A finished deep-linear run: the trace, the final state, and summary data.
#[derive(Debug, Clone)]
pub struct DlnRun {
    pub trace: Trace,
    pub state: DlnState,
    pub eta: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps_taken: usize,
}

/// Trains a fresh network against the built target.
///
/// `EtaChoice::Auto` resolves through the theory bounds; the bound curve in
/// the trace follows the initialization (sharing envelope for identity when
/// the target is SPD, geometric for ZAS). Rows are recorded every
/// `record_every` updates plus always the first and last.
///
/// # Errors
/// Propagates target construction, schedule, and divergence failures.
pub fn train_dln(
    spec: &TargetSpec,
    init: DlnInit,
    schedule: &SweSchedule,
    eta: EtaChoice,
    stop: &StopRule,
    record_every: usize,
) -> Result<DlnRun> {
    let target = spec.build()?;
    let depth = schedule.unit_size() * schedule.repeat_count();
    let eta = match eta {
        EtaChoice::Fixed(v) => v,
        EtaChoice::Auto => match init {
            DlnInit::Identity => eta_sharing_discrete(&target, depth)?,
            DlnInit::Zas => eta_zas(&target, depth)?,
        },
    };
    let bound = match init {
        DlnInit::Zas => BoundCurve::ZasGeometric { eta },
        DlnInit::Identity => match spd_extremes(&target) {
            Ok((lo, _)) => BoundCurve::SharedExp {
                rate: (2 * depth).saturating_sub(2) as f64 * (lo * lo).min(1.0) * eta,
            },
            Err(_) => BoundCurve::None,
        },
    };
    let state = DlnState::from_init(init, depth, target)?;
    train_dln_from(state, schedule, eta, stop, bound, record_every)
}

/// Trains from an explicit state — the building block for multi-phase
/// pipelines. Rows are recorded every `record_every` updates plus always the
/// first and last.
///
/// # Errors
/// Propagates schedule and gradient failures; divergence
/// (loss above [`DIVERGENCE_LIMIT`]) yields [`Error::Diverged`] with the
/// partial trace attached.
pub fn train_dln_from(
    mut state: DlnState,
    schedule: &SweSchedule,
    eta: f64,
    stop: &StopRule,
    bound: BoundCurve,
    record_every: usize,
) -> Result<DlnRun> {
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be positive".into()));
    }
    schedule.validate_depth(state.depth())?;
    let schedule = schedule.with_learning_rate(LearningRate::Constant(eta));
    let initial_loss = state.loss();
    let threshold = match stop.loss_threshold {
        LossThreshold::RelativeToInitial(rel) => rel * initial_loss,
        LossThreshold::Absolute(abs) => abs,
    };
    let horizon = stop.max_steps.min(schedule.total_steps());

    let mut trace = Trace::new(&DLN_TRACE_COLUMNS);
    let mut t = 0usize;
    loop {
        let loss = state.loss();
        let grads = state.grads()?;
        let stopping = loss <= threshold || t == horizon;
        if t % record_every == 0 || stopping {
            record_dln_row(&mut trace, &state, &schedule, t, loss, &grads, bound, initial_loss)?;
        }
        if stopping {
            return Ok(DlnRun {
                trace,
                eta,
                initial_loss,
                final_loss: loss,
                steps_taken: t,
                state,
            });
        }
        let transformed = apply_schedule(&grads, &schedule, t + 1)?;
        state.step_with(&transformed, schedule.eta_at(t + 1))?;
        t += 1;
        let new_loss = state.loss();
        if !new_loss.is_finite() || new_loss > DIVERGENCE_LIMIT {
            let row = vec![
                Some(t as f64),
                Some(new_loss),
                bound.value(t, initial_loss),
                None,
                None,
                None,
            ];
            trace.push_row(row)?;
            return Err(Error::Diverged {
                step: t,
                loss: new_loss,
                eta,
                trace: Box::new(trace),
            });
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn record_dln_row(
    trace: &mut Trace,
    state: &DlnState,
    schedule: &SweSchedule,
    t: usize,
    loss: f64,
    grads: &GradientSet,
    bound: BoundCurve,
    initial_loss: f64,
) -> Result<()> {
    // Stem spectrum: meaningful only while the layers are a genuine shared
    // stem — bit-identical and symmetric enough for the eigensolver.
    let tied_now = state.layers_all_equal() && (t == 0 || schedule.is_tied_at(t));
    let stem = if tied_now && state.dim() <= MAX_EIG_DIM {
        sym_eig(&state.layers()[0]).ok()
    } else {
        None
    };
    let grad_norm_mean =
        grads.iter().map(Matrix::frob_norm).sum::<f64>() / grads.len() as f64;
    trace.push_row(vec![
        Some(t as f64),
        Some(loss),
        bound.value(t, initial_loss),
        stem.as_ref().map(|e| e.lambda_min()),
        stem.as_ref().map(|e| e.lambda_max()),
        Some(grad_norm_mean),
    ])
}

/// Normalized one-step loss-decay probe
/// `[R(after one step of size eta_probe) - R(0)] / (eta_probe * R(0))`.
///
/// The schedule decides whether the probe step is shared or per-layer.
///
/// # Errors
/// Fails when `eta_probe <= 0` or the state is already at a minimum
/// (`R(0) = 0`).
pub fn initial_decay_rate(state: &DlnState, schedule: &SweSchedule, eta_probe: f64) -> Result<f64> {
    if eta_probe <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "probe step size {eta_probe} must be positive"
        )));
    }
    let r0 = state.loss();
    if r0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "decay probe needs a positive initial loss".into(),
        ));
    }
    let mut probe = state.clone();
    let grads = probe.grads()?;
    let transformed = apply_schedule(&grads, schedule, 1)?;
    probe.step_with(&transformed, eta_probe)?;
    Ok((probe.loss() - r0) / (eta_probe * r0))
}

// ---------------------------------------------------------------------------
// Trace checkers
// ---------------------------------------------------------------------------

/// Outcome of a per-step check over a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub checked: usize,
    pub first_violation: Option<Violation>,
}

/// First offending step of a failed check.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub observed: f64,
    pub allowed: f64,
}

impl CheckReport {
    #[must_use]
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Verifies the per-step contraction `R(t+1) <= (1 - rate) R(t)` between
/// every pair of consecutive recorded rows (strided rows compound the
/// factor).
///
/// # Errors
/// Fails on an empty trace or a missing step/loss column.
pub fn check_contraction(trace: &Trace, rate: f64) -> Result<CheckReport> {
    let steps = required_column(trace, "step")?;
    let losses = required_column(trace, "loss")?;
    let mut checked = 0;
    let mut prev: Option<(usize, f64)> = None;
    for (s, l) in steps.iter().zip(losses.iter()) {
        let (Some(s), Some(l)) = (s, l) else { continue };
        let step = *s as usize;
        if let Some((prev_step, prev_loss)) = prev {
            let factor = (1.0 - rate).max(0.0).powi((step - prev_step) as i32);
            let allowed = factor * prev_loss;
            checked += 1;
            if *l > allowed {
                return Ok(CheckReport {
                    checked,
                    first_violation: Some(Violation {
                        step,
                        observed: *l,
                        allowed,
                    }),
                });
            }
        }
        prev = Some((step, *l));
    }
    Ok(CheckReport {
        checked,
        first_violation: None,
    })
}

/// Verifies `loss <= bound` on every row where both are recorded.
///
/// # Errors
/// Fails on an empty trace or missing columns.
pub fn check_trace_bound(trace: &Trace) -> Result<CheckReport> {
    let steps = required_column(trace, "step")?;
    let losses = required_column(trace, "loss")?;
    let bounds = required_column(trace, "bound")?;
    let mut checked = 0;
    for ((s, l), b) in steps.iter().zip(losses.iter()).zip(bounds.iter()) {
        let (Some(s), Some(l), Some(b)) = (s, l, b) else { continue };
        checked += 1;
        if *l > *b {
            return Ok(CheckReport {
                checked,
                first_violation: Some(Violation {
                    step: *s as usize,
                    observed: *l,
                    allowed: *b,
                }),
            });
        }
    }
    Ok(CheckReport {
        checked,
        first_violation: None,
    })
}

/// Eigenvalue envelope `[min(lambda_min^{1/L}, 1) - 1e-9,
/// max(lambda_max^{1/L}, 1) + 1e-9]` for the shared stem of an SPD target.
///
/// # Errors
/// Fails when the target is not SPD or `depth == 0`.
pub fn stem_envelope(phi: &Matrix, depth: usize) -> Result<(f64, f64)> {
    require_depth(depth)?;
    let (lo, hi) = spd_extremes(phi)?;
    let l = depth as f64;
    Ok((
        lo.powf(1.0 / l).min(1.0) - 1e-9,
        hi.powf(1.0 / l).max(1.0) + 1e-9,
    ))
}

/// Verifies that recorded stem eigenvalues stay inside `[lo, hi]` on every
/// row that carries them.
///
/// # Errors
/// Fails on an empty trace or missing stem columns.
pub fn check_envelope(trace: &Trace, lo: f64, hi: f64) -> Result<CheckReport> {
    let steps = required_column(trace, "step")?;
    let mins = required_column(trace, "lambda_min_stem")?;
    let maxs = required_column(trace, "lambda_max_stem")?;
    let mut checked = 0;
    for ((s, mn), mx) in steps.iter().zip(mins.iter()).zip(maxs.iter()) {
        let (Some(s), Some(mn), Some(mx)) = (s, mn, mx) else { continue };
        checked += 1;
        if *mn < lo {
            return Ok(CheckReport {
                checked,
                first_violation: Some(Violation {
                    step: *s as usize,
                    observed: *mn,
                    allowed: lo,
                }),
            });
        }
        if *mx > hi {
            return Ok(CheckReport {
                checked,
                first_violation: Some(Violation {
                    step: *s as usize,
                    observed: *mx,
                    allowed: hi,
                }),
            });
        }
    }
    Ok(CheckReport {
        checked,
        first_violation: None,
    })
}

fn required_column(trace: &Trace, name: &str) -> Result<Vec<Option<f64>>> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("trace has no rows".into()));
    }
    trace.column(name)
}

// ---------------------------------------------------------------------------
// Two-phase symmetric-stem pipeline
// ---------------------------------------------------------------------------

/// Result of the two-phase run: symmetric-stem sharing toward the
/// symmetrized target, then untied training to the full target.
#[derive(Debug, Clone)]
pub struct TwoPhaseResult {
    pub phase1: DlnRun,
    pub phase2: DlnRun,
    /// `||product - (Phi + Phi^T)/2||_F` at the phase-1 endpoint.
    pub sym_gap: f64,
    /// `||Phi - (Phi + Phi^T)/2||_F`, the irreducible asymmetric residual.
    pub antisym_floor: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Caps for the two phases; generous defaults that the threshold stops
/// usually undercut by a wide margin.
#[derive(Debug, Clone, Copy)]
pub struct TwoPhaseCaps {
    pub phase1_max_steps: usize,
    pub phase2_max_steps: usize,
    pub record_every: usize,
}

impl Default for TwoPhaseCaps {
    fn default() -> Self {
        TwoPhaseCaps {
            phase1_max_steps: 10_000_000,
            phase2_max_steps: 30_000_000,
            record_every: 10_000,
        }
    }
}

/// Runs the two-phase pipeline for a (possibly asymmetric) target with an
/// SPD symmetric part.
///
/// Phase 1 trains from identity with the symmetric-stem transform at the
/// discrete sharing step size of the symmetrized target, until the loss is
/// within `4e-13` of the irreducible floor `0.5 * ||Phi - Phi_s||_F^2`
/// (which pins the symmetric gap below 1e-6). Phase 2 unties, steps at a
/// tenth of that rate, and stops at `final_rel * R(0)` where `R(0)` is the
/// identity-initialization loss.
///
/// # Errors
/// Fails when the symmetrized target is not positive definite, or on
/// divergence in either phase.
pub fn train_two_phase(
    spec: &TargetSpec,
    depth: usize,
    final_rel: f64,
    caps: &TwoPhaseCaps,
) -> Result<TwoPhaseResult> {
    require_depth(depth)?;
    let phi = spec.build()?;
    let phi_s = phi.symmetrized()?;
    let antisym_floor = phi.sub(&phi_s)?.frob_norm();
    let floor_loss = 0.5 * antisym_floor * antisym_floor;
    let eta1 = eta_sharing_discrete(&phi_s, depth)?;

    let start = DlnState::from_init(DlnInit::Identity, depth, phi.clone())?;
    let initial_loss = start.loss();

    let phase1_schedule = SweSchedule::new(
        crate::swe_optim::SweMode::SymmetricStemSwe,
        caps.phase1_max_steps + 1,
        caps.phase1_max_steps + 1,
        1,
        depth,
        LearningRate::Constant(eta1),
    )?;
    let phase1_stop = StopRule {
        max_steps: caps.phase1_max_steps,
        loss_threshold: LossThreshold::Absolute(floor_loss + 4e-13),
    };
    let phase1 = train_dln_from(
        start,
        &phase1_schedule,
        eta1,
        &phase1_stop,
        BoundCurve::None,
        caps.record_every,
    )?;
    let sym_gap = phase1.state.product().sub(&phi_s)?.frob_norm();

    let phase2_schedule = SweSchedule::new(
        crate::swe_optim::SweMode::NoSharing,
        caps.phase2_max_steps + 1,
        0,
        1,
        depth,
        LearningRate::Constant(eta1 / 10.0),
    )?;
    let phase2_stop = StopRule {
        max_steps: caps.phase2_max_steps,
        loss_threshold: LossThreshold::Absolute(final_rel * initial_loss),
    };
    let phase2 = train_dln_from(
        phase1.state.clone(),
        &phase2_schedule,
        eta1 / 10.0,
        &phase2_stop,
        BoundCurve::None,
        caps.record_every,
    )?;
    let final_loss = phase2.final_loss;

    Ok(TwoPhaseResult {
        phase1,
        phase2,
        sym_gap,
        antisym_floor,
        initial_loss,
        final_loss,
    })
}
