//! Python bindings for the swe-lab numerical laboratory.
//!
//! Exposes the core pieces — matrices, sharing schedules, traces, and the
//! three experiment families (deep linear networks, overparameterized
//! regression, residual tanh stacks) — as one in-process `swelab` module.
//!
//! Usage from Python:
//!
//! ```python
//! import swelab
//!
//! target = swelab.Target.alpha_identity(4, 2.0)
//! schedule = swelab.Schedule.full_sharing("always_shared", 5000, 0, 4, 0.0)
//! run = swelab.train_dln(target, "identity", schedule)
//! print(run.final_loss, run.steps_taken)
//! ```
//!
//! Every function validates through the same code paths as the Rust API and
//! surfaces failures as `ValueError` (bad arguments or configs) or
//! `RuntimeError` (numerical breakdown such as divergence).

use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use swe_lab::core_math::{self, Matrix as CoreMatrix};
use swe_lab::deep_linear::{self as dln, DlnInit, EtaChoice, LossThreshold, StopRule, TargetKind, TargetSpec};
use swe_lab::error::Error;
use swe_lab::harness::config::parse_config;
use swe_lab::regression as reg;
use swe_lab::stacked as st;
use swe_lab::swe_optim::{LearningRate, SweMode, SweSchedule};
use swe_lab::trace::Trace as CoreTrace;

fn to_py(err: Error) -> PyErr {
    match &err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Csv { .. } | Error::Io { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn parse_mode(name: &str) -> PyResult<SweMode> {
    match name {
        "swe" => Ok(SweMode::Swe),
        "no_sharing" => Ok(SweMode::NoSharing),
        "always_shared" => Ok(SweMode::AlwaysShared),
        "repara" => Ok(SweMode::Repara),
        "symmetric_stem_swe" => Ok(SweMode::SymmetricStemSwe),
        other => Err(PyValueError::new_err(format!(
            "unknown mode {other:?}; expected one of swe, no_sharing, always_shared, \
             repara, symmetric_stem_swe"
        ))),
    }
}

fn mode_name(mode: SweMode) -> &'static str {
    match mode {
        SweMode::Swe => "swe",
        SweMode::NoSharing => "no_sharing",
        SweMode::AlwaysShared => "always_shared",
        SweMode::Repara => "repara",
        SweMode::SymmetricStemSwe => "symmetric_stem_swe",
    }
}

fn parse_init(name: &str) -> PyResult<DlnInit> {
    match name {
        "identity" => Ok(DlnInit::Identity),
        "zas" => Ok(DlnInit::Zas),
        other => Err(PyValueError::new_err(format!(
            "unknown init {other:?}; expected \"identity\" or \"zas\""
        ))),
    }
}

/// Dense row-major matrix of `f64`, mirroring the Rust core type.
#[pyclass(module = "swelab", from_py_object)]
#[derive(Clone)]
struct Matrix {
    inner: CoreMatrix,
}

#[pymethods]
impl Matrix {
    /// Builds a matrix from a list of equal-length rows.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Matrix { inner: CoreMatrix::from_rows(&rows).map_err(to_py)? })
    }

    #[staticmethod]
    fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { inner: CoreMatrix::zeros(rows, cols) }
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        Matrix { inner: CoreMatrix::identity(n) }
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.rows() || j >= self.inner.cols() {
            return Err(PyIndexError::new_err(format!(
                "index ({i}, {j}) out of range for {}x{} matrix",
                self.inner.rows(),
                self.inner.cols()
            )));
        }
        Ok(self.inner.get(i, j))
    }

    fn set(&mut self, i: usize, j: usize, value: f64) -> PyResult<()> {
        if i >= self.inner.rows() || j >= self.inner.cols() {
            return Err(PyIndexError::new_err(format!(
                "index ({i}, {j}) out of range for {}x{} matrix",
                self.inner.rows(),
                self.inner.cols()
            )));
        }
        self.inner.set(i, j, value);
        Ok(())
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.inner.rows()).map(|i| self.inner.row(i).to_vec()).collect()
    }

    fn frob_norm(&self) -> f64 {
        self.inner.frob_norm()
    }

    fn transpose(&self) -> Matrix {
        Matrix { inner: self.inner.transpose() }
    }

    fn matmul(&self, other: &Matrix) -> PyResult<Matrix> {
        Ok(Matrix { inner: self.inner.matmul(&other.inner).map_err(to_py)? })
    }

    fn add(&self, other: &Matrix) -> PyResult<Matrix> {
        Ok(Matrix { inner: self.inner.add(&other.inner).map_err(to_py)? })
    }

    fn sub(&self, other: &Matrix) -> PyResult<Matrix> {
        Ok(Matrix { inner: self.inner.sub(&other.inner).map_err(to_py)? })
    }

    fn scaled(&self, factor: f64) -> Matrix {
        Matrix { inner: self.inner.scaled(factor) }
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.matvec(&x).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Matrix({}x{}, frob={:.6e})", self.inner.rows(), self.inner.cols(), self.inner.frob_norm())
    }
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of a symmetric
/// positive-definite matrix.
#[pyfunction]
fn spd_extremes(matrix: &Matrix) -> PyResult<(f64, f64)> {
    core_math::spd_extremes(&matrix.inner).map_err(to_py)
}

/// Recipe for the matrix a deep linear network is trained against.
#[pyclass(module = "swelab", skip_from_py_object)]
#[derive(Clone)]
struct Target {
    spec: TargetSpec,
}

#[pymethods]
impl Target {
    /// `alpha * I` in the given dimension.
    #[staticmethod]
    fn alpha_identity(dim: usize, alpha: f64) -> PyResult<Self> {
        let spec = TargetSpec::new(TargetKind::AlphaIdentity { alpha }, dim).map_err(to_py)?;
        Ok(Target { spec })
    }

    /// SPD matrix with the given spectrum, conjugated by a seeded rotation.
    #[staticmethod]
    fn spd_spectrum(eigenvalues: Vec<f64>, rotation_seed: u64) -> PyResult<Self> {
        let dim = eigenvalues.len();
        let spec = TargetSpec::new(TargetKind::SpdSpectrum { eigenvalues, rotation_seed }, dim)
            .map_err(to_py)?;
        Ok(Target { spec })
    }

    /// SPD base plus a seeded perturbation of relative size `rho`.
    #[staticmethod]
    fn near_spd(base: &Target, rho: f64, perturbation_seed: u64) -> PyResult<Self> {
        let dim = base.spec.dim();
        let kind = TargetKind::NearSpd {
            base: Box::new(base.spec.clone()),
            rho,
            perturbation_seed,
        };
        Ok(Target { spec: TargetSpec::new(kind, dim).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Materializes the target matrix.
    fn build(&self) -> PyResult<Matrix> {
        Ok(Matrix { inner: self.spec.build().map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("Target(dim={})", self.spec.dim())
    }
}

/// Weight-sharing policy: horizon, untie step, sharing shape, and step size.
///
/// Modes: `"swe"` (share until the untie step, then train freely),
/// `"no_sharing"`, `"always_shared"`, `"repara"`, `"symmetric_stem_swe"`.
#[pyclass(module = "swelab", skip_from_py_object)]
#[derive(Clone)]
struct Schedule {
    inner: SweSchedule,
}

#[pymethods]
impl Schedule {
    /// Full constructor with an explicit `unit_size x repeat_count` sharing
    /// shape (layer `i` shares with every layer congruent to it modulo
    /// `unit_size`).
    #[new]
    fn new(
        mode: &str,
        total_steps: usize,
        untie_step: usize,
        unit_size: usize,
        repeat_count: usize,
        eta: f64,
    ) -> PyResult<Self> {
        let inner = SweSchedule::new(
            parse_mode(mode)?,
            total_steps,
            untie_step,
            unit_size,
            repeat_count,
            LearningRate::Constant(eta),
        )
        .map_err(to_py)?;
        Ok(Schedule { inner })
    }

    /// One sharing group spanning all `depth` layers.
    #[staticmethod]
    fn full_sharing(mode: &str, total_steps: usize, untie_step: usize, depth: usize, eta: f64) -> PyResult<Self> {
        let inner = SweSchedule::full_sharing(parse_mode(mode)?, total_steps, untie_step, depth, eta)
            .map_err(to_py)?;
        Ok(Schedule { inner })
    }

    /// Whether tie classes are averaged at 1-based step `t`.
    fn is_tied_at(&self, t: usize) -> bool {
        self.inner.is_tied_at(t)
    }

    /// Learning rate for 1-based step `t`.
    fn eta_at(&self, t: usize) -> f64 {
        self.inner.eta_at(t)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        mode_name(self.inner.mode())
    }

    #[getter]
    fn total_steps(&self) -> usize {
        self.inner.total_steps()
    }

    #[getter]
    fn untie_step(&self) -> usize {
        self.inner.untie_step()
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule(mode={:?}, total_steps={}, untie_step={})",
            mode_name(self.inner.mode()),
            self.inner.total_steps(),
            self.inner.untie_step()
        )
    }
}

/// Column-labelled table of per-step metrics, round-trippable through CSV.
#[pyclass(module = "swelab", skip_from_py_object)]
#[derive(Clone)]
struct Trace {
    inner: CoreTrace,
}

#[pymethods]
impl Trace {
    fn columns(&self) -> Vec<String> {
        self.inner.columns().to_vec()
    }

    fn num_rows(&self) -> usize {
        self.inner.num_rows()
    }

    /// Value at `(row, column)`, or `None` where nothing was recorded.
    fn get(&self, row: usize, column: &str) -> Option<f64> {
        self.inner.get(row, column)
    }

    /// Last recorded value in a column.
    fn last(&self, column: &str) -> Option<f64> {
        self.inner.last(column)
    }

    fn column(&self, name: &str) -> PyResult<Vec<Option<f64>>> {
        self.inner.column(name).map_err(to_py)
    }

    fn row(&self, i: usize) -> PyResult<Vec<Option<f64>>> {
        if i >= self.inner.num_rows() {
            return Err(PyIndexError::new_err(format!(
                "row {i} out of range for trace with {} rows",
                self.inner.num_rows()
            )));
        }
        Ok(self.inner.row(i).to_vec())
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Trace { inner: CoreTrace::from_csv(text).map_err(to_py)? })
    }

    fn __len__(&self) -> usize {
        self.inner.num_rows()
    }

    fn __repr__(&self) -> String {
        format!("Trace({} columns x {} rows)", self.inner.columns().len(), self.inner.num_rows())
    }
}

/// Finished deep-linear-network run.
#[pyclass(module = "swelab")]
struct DlnRun {
    #[pyo3(get)]
    eta: f64,
    #[pyo3(get)]
    initial_loss: f64,
    #[pyo3(get)]
    final_loss: f64,
    #[pyo3(get)]
    steps_taken: usize,
    trace: CoreTrace,
    layers: Vec<CoreMatrix>,
    product: CoreMatrix,
}

#[pymethods]
impl DlnRun {
    fn trace(&self) -> Trace {
        Trace { inner: self.trace.clone() }
    }

    fn layers(&self) -> Vec<Matrix> {
        self.layers.iter().map(|m| Matrix { inner: m.clone() }).collect()
    }

    /// `W_L ... W_1` at the end of training.
    fn product(&self) -> Matrix {
        Matrix { inner: self.product.clone() }
    }

    fn __repr__(&self) -> String {
        format!(
            "DlnRun(final_loss={:.6e}, steps_taken={}, eta={:.6e})",
            self.final_loss, self.steps_taken, self.eta
        )
    }
}

/// Trains a deep linear network against a target under a sharing schedule.
///
/// `init` is `"identity"` or `"zas"` (identity layers with a zeroed last
/// layer). `eta=None` resolves the step size from the theory bound matching
/// the initialization. Training stops at `max_steps`, or earlier once the
/// loss falls below `stop_abs` (absolute) or `stop_rel` times the initial
/// loss.
#[pyfunction]
#[pyo3(signature = (target, init, schedule, eta=None, max_steps=100_000, stop_rel=1e-10, stop_abs=None, record_every=1))]
#[allow(clippy::too_many_arguments)]
fn train_dln(
    target: &Target,
    init: &str,
    schedule: &Schedule,
    eta: Option<f64>,
    max_steps: usize,
    stop_rel: f64,
    stop_abs: Option<f64>,
    record_every: usize,
) -> PyResult<DlnRun> {
    let choice = match eta {
        Some(v) => EtaChoice::Fixed(v),
        None => EtaChoice::Auto,
    };
    let stop = StopRule {
        max_steps,
        loss_threshold: match stop_abs {
            Some(v) => LossThreshold::Absolute(v),
            None => LossThreshold::RelativeToInitial(stop_rel),
        },
    };
    let run = dln::train_dln(&target.spec, parse_init(init)?, &schedule.inner, choice, &stop, record_every)
        .map_err(to_py)?;
    Ok(DlnRun {
        eta: run.eta,
        initial_loss: run.initial_loss,
        final_loss: run.final_loss,
        steps_taken: run.steps_taken,
        trace: run.trace,
        layers: run.state.layers().to_vec(),
        product: run.state.product().clone(),
    })
}

/// Step-size bound under which the shared phase contracts in expectation.
#[pyfunction]
fn eta_sharing_lemma(phi: &Matrix, depth: usize) -> PyResult<f64> {
    dln::eta_sharing_lemma(&phi.inner, depth).map_err(to_py)
}

/// Step-size bound for the discrete-time shared-phase guarantee.
#[pyfunction]
fn eta_sharing_discrete(phi: &Matrix, depth: usize) -> PyResult<f64> {
    dln::eta_sharing_discrete(&phi.inner, depth).map_err(to_py)
}

/// Step-size bound for the zero-at-start trajectory guarantee.
#[pyfunction]
fn eta_zas(phi: &Matrix, depth: usize) -> PyResult<f64> {
    dln::eta_zas(&phi.inner, depth).map_err(to_py)
}

/// Steps the shared-phase guarantee needs to reach `target_rel` times the
/// initial loss.
#[pyfunction]
fn shared_guarantee_steps(phi: &Matrix, depth: usize, target_rel: f64) -> PyResult<usize> {
    dln::shared_guarantee_steps(&phi.inner, depth, target_rel).map_err(to_py)
}

/// Steps the zero-at-start guarantee needs to reach `target_rel` times the
/// initial loss.
#[pyfunction]
fn zas_guarantee_steps(phi: &Matrix, depth: usize, target_rel: f64) -> PyResult<usize> {
    dln::zas_guarantee_steps(&phi.inner, depth, target_rel).map_err(to_py)
}

/// `(low, high)` band that the spectrum of each shared layer stays inside
/// once the shared phase has converged.
#[pyfunction]
fn stem_envelope(phi: &Matrix, depth: usize) -> PyResult<(f64, f64)> {
    dln::stem_envelope(&phi.inner, depth).map_err(to_py)
}

/// Fixed random regression instance: train/test designs and the planted
/// coefficient vector.
#[pyclass(module = "swelab")]
struct RegressionProblem {
    inner: reg::RegressionProblem,
}

#[pymethods]
impl RegressionProblem {
    #[getter]
    fn dims(&self) -> usize {
        self.inner.dims()
    }

    #[getter]
    fn num_train(&self) -> usize {
        self.inner.num_train()
    }

    #[getter]
    fn num_test(&self) -> usize {
        self.inner.num_test()
    }

    /// Planted coefficients the labels were generated from.
    fn w_star(&self) -> Vec<f64> {
        self.inner.w_star().to_vec()
    }

    /// Constant-vector component of the planted coefficients.
    fn stem_star(&self) -> Vec<f64> {
        self.inner.stem_star()
    }

    /// Planted coefficients minus their constant component.
    fn branch_star(&self) -> Vec<f64> {
        self.inner.branch_star()
    }

    fn train_mse(&self, w: Vec<f64>) -> PyResult<f64> {
        self.inner.train_mse(&w).map_err(to_py)
    }

    fn test_mse(&self, w: Vec<f64>) -> PyResult<f64> {
        self.inner.test_mse(&w).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "RegressionProblem(dims={}, num_train={}, num_test={})",
            self.inner.dims(),
            self.inner.num_train(),
            self.inner.num_test()
        )
    }
}

/// Draws a seeded overparameterized regression instance (Gaussian designs,
/// coefficients `1 + N(0, 1)`).
#[pyfunction]
fn make_problem(dims: usize, num_train: usize, num_test: usize, seed: u64) -> PyResult<RegressionProblem> {
    Ok(RegressionProblem { inner: reg::make_problem(dims, num_train, num_test, seed).map_err(to_py)? })
}

/// Step size `1 / (2 lambda_max)` of the empirical covariance.
#[pyfunction]
fn auto_eta(problem: &RegressionProblem) -> PyResult<f64> {
    reg::auto_eta(&problem.inner).map_err(to_py)
}

/// Minimum-norm interpolating solution of the training system.
#[pyfunction]
fn min_norm_solution(problem: &RegressionProblem) -> PyResult<Vec<f64>> {
    reg::min_norm_solution(&problem.inner).map_err(to_py)
}

/// Exact optimum of the one-scalar shared model on the training data.
#[pyfunction]
fn shared_phase_closed_form(problem: &RegressionProblem) -> PyResult<f64> {
    reg::shared_phase_closed_form(&problem.inner).map_err(to_py)
}

/// Finished regression run.
#[pyclass(module = "swelab")]
struct RegressionRun {
    #[pyo3(get)]
    eta: f64,
    #[pyo3(get)]
    initial_train_mse: f64,
    #[pyo3(get)]
    final_train_mse: f64,
    #[pyo3(get)]
    final_test_mse: f64,
    final_w: Vec<f64>,
    trace: CoreTrace,
}

#[pymethods]
impl RegressionRun {
    fn final_w(&self) -> Vec<f64> {
        self.final_w.clone()
    }

    fn trace(&self) -> Trace {
        Trace { inner: self.trace.clone() }
    }

    fn __repr__(&self) -> String {
        format!(
            "RegressionRun(final_train_mse={:.6e}, final_test_mse={:.6e})",
            self.final_train_mse, self.final_test_mse
        )
    }
}

/// Trains regression coefficients from zero under the schedule (one sharing
/// group spanning all coordinates). `eta=None` resolves through `auto_eta`.
#[pyfunction]
#[pyo3(signature = (problem, schedule, eta=None))]
fn train_regression(problem: &RegressionProblem, schedule: &Schedule, eta: Option<f64>) -> PyResult<RegressionRun> {
    let run = reg::train_regression(&problem.inner, &schedule.inner, eta).map_err(to_py)?;
    Ok(RegressionRun {
        eta: run.eta,
        initial_train_mse: run.initial_train_mse,
        final_train_mse: run.final_train_mse,
        final_test_mse: run.final_test_mse,
        final_w: run.final_w,
        trace: run.trace,
    })
}

/// Long-form scan of stem-recovery error over `(L, n, seed)` cells.
#[pyfunction]
fn prop1_error_scan(l_grid: Vec<usize>, n_grid: Vec<usize>, seeds: Vec<u64>) -> PyResult<Trace> {
    Ok(Trace { inner: reg::prop1_error_scan(&l_grid, &n_grid, &seeds).map_err(to_py)? })
}

/// Log-log slope of mean stem error against `L / n`, fitted over the scan's
/// per-cell means.
#[pyfunction]
fn fit_loglog_slope(table: &Trace) -> PyResult<f64> {
    reg::fit_loglog_slope(&table.inner).map_err(to_py)
}

/// Residual tanh stack with a fixed linear readout.
#[pyclass(module = "swelab", skip_from_py_object)]
#[derive(Clone)]
struct StackedNet {
    inner: st::StackedNet,
}

#[pymethods]
impl StackedNet {
    #[new]
    fn new(blocks: Vec<Matrix>, readout: Vec<f64>) -> PyResult<Self> {
        let blocks = blocks.into_iter().map(|m| m.inner).collect();
        Ok(StackedNet { inner: st::StackedNet::new(blocks, readout).map_err(to_py)? })
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn blocks(&self) -> Vec<Matrix> {
        self.inner.blocks().iter().map(|m| Matrix { inner: m.clone() }).collect()
    }

    fn readout(&self) -> Vec<f64> {
        self.inner.readout().to_vec()
    }

    /// Scalar prediction for one input vector.
    fn output(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.output(&x).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("StackedNet(depth={}, dim={})", self.inner.depth(), self.inner.dim())
    }
}

/// Teacher-generated train/test data for the residual stack experiment.
#[pyclass(module = "swelab")]
struct Task {
    inner: st::SyntheticTask,
}

#[pymethods]
impl Task {
    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_train(&self) -> usize {
        self.inner.num_train()
    }

    #[getter]
    fn num_test(&self) -> usize {
        self.inner.num_test()
    }

    fn teacher(&self) -> StackedNet {
        StackedNet { inner: self.inner.teacher().clone() }
    }

    fn __repr__(&self) -> String {
        format!(
            "Task(depth={}, dim={}, num_train={}, num_test={})",
            self.inner.depth(),
            self.inner.dim(),
            self.inner.num_train(),
            self.inner.num_test()
        )
    }
}

/// Builds a seeded teacher network and samples train/test sets from it.
#[pyfunction]
fn make_task(depth: usize, dim: usize, num_train: usize, num_test: usize, teacher_seed: u64) -> PyResult<Task> {
    Ok(Task { inner: st::make_task(depth, dim, num_train, num_test, teacher_seed).map_err(to_py)? })
}

/// Finished residual-stack run.
#[pyclass(module = "swelab")]
struct StackedRun {
    #[pyo3(get)]
    initial_train_mse: f64,
    #[pyo3(get)]
    final_train_mse: f64,
    #[pyo3(get)]
    final_test_mse: f64,
    net: st::StackedNet,
    trace: CoreTrace,
}

#[pymethods]
impl StackedRun {
    fn net(&self) -> StackedNet {
        StackedNet { inner: self.net.clone() }
    }

    fn trace(&self) -> Trace {
        Trace { inner: self.trace.clone() }
    }

    fn __repr__(&self) -> String {
        format!(
            "StackedRun(final_train_mse={:.6e}, final_test_mse={:.6e})",
            self.final_train_mse, self.final_test_mse
        )
    }
}

/// Trains a fresh student on the task with minibatch gradient descent under
/// the sharing schedule.
#[pyfunction]
#[pyo3(signature = (task, schedule, eta, batch, seed, record_every=10))]
fn train_stacked(
    task: &Task,
    schedule: &Schedule,
    eta: f64,
    batch: usize,
    seed: u64,
    record_every: usize,
) -> PyResult<StackedRun> {
    let run = st::train_stacked(&task.inner, &schedule.inner, eta, batch, seed, record_every).map_err(to_py)?;
    Ok(StackedRun {
        initial_train_mse: run.initial_train_mse,
        final_train_mse: run.final_train_mse,
        final_test_mse: run.final_test_mse,
        net: run.net,
        trace: run.trace,
    })
}

/// Long-form sweep results with per-configuration medians.
#[pyclass(module = "swelab")]
struct SweepTable {
    inner: st::SweepTable,
}

#[pymethods]
impl SweepTable {
    /// `(label, median final test MSE)` per swept configuration.
    fn medians(&self) -> Vec<(String, f64)> {
        self.inner.medians()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn summary_csv(&self) -> String {
        self.inner.summary_csv()
    }

    fn __repr__(&self) -> String {
        format!("SweepTable({} rows)", self.inner.rows().len())
    }
}

/// Replicated runs over untie points placed at the given fractions of the
/// horizon.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn untie_sweep(
    task: &Task,
    fractions: Vec<f64>,
    reps: usize,
    steps: usize,
    eta: f64,
    batch: usize,
    record_every: usize,
) -> PyResult<SweepTable> {
    let table = st::untie_sweep(&task.inner, &fractions, reps, steps, eta, batch, record_every).map_err(to_py)?;
    Ok(SweepTable { inner: table })
}

/// Replicated runs over `(unit_size, repeat_count)` sharing shapes.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn grouping_sweep(
    task: &Task,
    shapes: Vec<(usize, usize)>,
    reps: usize,
    steps: usize,
    untie: usize,
    eta: f64,
    batch: usize,
    record_every: usize,
) -> PyResult<SweepTable> {
    let table = st::grouping_sweep(&task.inner, &shapes, reps, steps, untie, eta, batch, record_every)
        .map_err(to_py)?;
    Ok(SweepTable { inner: table })
}

/// Result of driving a full experiment config: pass/fail status, rendered
/// report, and where the artifacts were written.
#[pyclass(module = "swelab")]
struct RunOutcome {
    #[pyo3(get)]
    passed: bool,
    #[pyo3(get)]
    report: String,
    #[pyo3(get)]
    out_dir: String,
    #[pyo3(get)]
    files: Vec<String>,
}

#[pymethods]
impl RunOutcome {
    fn __repr__(&self) -> String {
        format!("RunOutcome(passed={}, out_dir={:?})", self.passed, self.out_dir)
    }
}

/// Runs one experiment from a JSON config string — the same configs the
/// `swe-lab` binary accepts — writing CSV traces, a summary, and a report
/// under the config's output directory.
#[pyfunction]
fn run_config(json: &str) -> PyResult<RunOutcome> {
    let config = parse_config(json).map_err(to_py)?;
    let artifacts = swe_lab::harness::run(&config).map_err(to_py)?;
    Ok(RunOutcome {
        passed: artifacts.report.passed(),
        report: artifacts.report.render(),
        out_dir: artifacts.out_dir.display().to_string(),
        files: artifacts.files.iter().map(|p| p.display().to_string()).collect(),
    })
}

#[pymodule]
fn swelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Matrix>()?;
    m.add_class::<Target>()?;
    m.add_class::<Schedule>()?;
    m.add_class::<Trace>()?;
    m.add_class::<DlnRun>()?;
    m.add_class::<RegressionProblem>()?;
    m.add_class::<RegressionRun>()?;
    m.add_class::<StackedNet>()?;
    m.add_class::<Task>()?;
    m.add_class::<StackedRun>()?;
    m.add_class::<SweepTable>()?;
    m.add_class::<RunOutcome>()?;

    m.add_function(wrap_pyfunction!(spd_extremes, m)?)?;
    m.add_function(wrap_pyfunction!(train_dln, m)?)?;
    m.add_function(wrap_pyfunction!(eta_sharing_lemma, m)?)?;
    m.add_function(wrap_pyfunction!(eta_sharing_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(eta_zas, m)?)?;
    m.add_function(wrap_pyfunction!(shared_guarantee_steps, m)?)?;
    m.add_function(wrap_pyfunction!(zas_guarantee_steps, m)?)?;
    m.add_function(wrap_pyfunction!(stem_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(make_problem, m)?)?;
    m.add_function(wrap_pyfunction!(auto_eta, m)?)?;
    m.add_function(wrap_pyfunction!(min_norm_solution, m)?)?;
    m.add_function(wrap_pyfunction!(shared_phase_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(train_regression, m)?)?;
    m.add_function(wrap_pyfunction!(prop1_error_scan, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog_slope, m)?)?;
    m.add_function(wrap_pyfunction!(make_task, m)?)?;
    m.add_function(wrap_pyfunction!(train_stacked, m)?)?;
    m.add_function(wrap_pyfunction!(untie_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(grouping_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;

    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
