//! A stack of identical residual blocks `h_l = h_{l-1} + tanh(W_l h_{l-1})`
//! with a fixed linear readout `y = c^T h_L`, trained on teacher-generated
//! labels by mini-batch gradient descent under a sharing schedule.
//!
//! Backpropagation is written out by hand; the tests pin it against finite
//! differences and an independent straight-line forward pass.

use crate::core_math::matrix::{outer, Matrix};
use crate::core_math::rng::{gaussian_matrix, Rng};
use crate::core_math::stats::median;
use crate::error::{Error, Result};
use crate::swe_optim::{apply_schedule, sgd_step, GradientSet, LearningRate, SweSchedule};
use crate::trace::Trace;

/// Column layout of stacked-run traces; rows are recorded before the step
/// they are labeled with, exactly as in the regression traces.
pub const STACKED_TRACE_COLUMNS: [&str; 3] = ["step", "train_mse", "test_mse"];

/// Residual tanh blocks plus an untrained readout vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedNet {
    blocks: Vec<Matrix>,
    readout: Vec<f64>,
}

/// Per-layer activations saved by [`StackedNet::forward`] for the backward
/// pass: `h[l]` is the state entering block `l+1` (`h[0]` is the input) and
/// `a[l] = tanh(W_{l+1} h[l])`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    h: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
}

impl StackedNet {
    /// Wraps blocks and a readout after shape validation.
    ///
    /// # Errors
    /// Fails on empty stacks, non-square blocks, or mismatched dimensions.
    pub fn new(blocks: Vec<Matrix>, readout: Vec<f64>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("stack needs at least one block".into()));
        }
        let d = readout.len();
        for (l, w) in blocks.iter().enumerate() {
            if w.rows() != d || w.cols() != d {
                return Err(Error::InvalidArgument(format!(
                    "block {} is {}x{}, readout dimension is {d}",
                    l + 1,
                    w.rows(),
                    w.cols()
                )));
            }
        }
        Ok(StackedNet { blocks, readout })
    }

    #[must_use]
    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.readout.len()
    }

    #[must_use]
    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    #[must_use]
    pub fn readout(&self) -> &[f64] {
        &self.readout
    }

    /// Runs the stack, returning the scalar output and the caches the
    /// backward pass needs.
    ///
    /// # Errors
    /// Fails on a wrong-length input.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache)> {
        if x.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "input has {} entries, network dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        let mut h = Vec::with_capacity(self.depth() + 1);
        let mut a = Vec::with_capacity(self.depth());
        h.push(x.to_vec());
        for w in &self.blocks {
            let prev = h.last().expect("nonempty");
            let mut act = w.matvec(prev)?;
            for v in &mut act {
                *v = v.tanh();
            }
            let next: Vec<f64> = prev.iter().zip(act.iter()).map(|(p, t)| p + t).collect();
            a.push(act);
            h.push(next);
        }
        let y = dot(&self.readout, h.last().expect("nonempty"));
        Ok((y, ForwardCache { h, a }))
    }

    /// Output only, without keeping caches.
    ///
    /// # Errors
    /// Fails on a wrong-length input.
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.0)
    }

    /// Reverse-mode gradients of `dy * y` with respect to every block:
    /// seed `delta_L = dy * c`, then per block
    /// `m_l = delta_l ⊙ (1 - a_l^2)`, `dW_l = m_l h_{l-1}^T`,
    /// `delta_{l-1} = delta_l + W_l^T m_l`.
    ///
    /// # Errors
    /// Fails when the cache shape does not match this network.
    pub fn backward(&self, cache: &ForwardCache, dy: f64) -> Result<GradientSet> {
        let l = self.depth();
        let d = self.dim();
        if cache.h.len() != l + 1
            || cache.a.len() != l
            || cache.h.iter().any(|v| v.len() != d)
            || cache.a.iter().any(|v| v.len() != d)
        {
            return Err(Error::InvalidArgument(
                "forward cache does not match the network shape".into(),
            ));
        }
        let mut delta: Vec<f64> = self.readout.iter().map(|c| dy * c).collect();
        let mut grads = vec![Matrix::zeros(0, 0); l];
        for idx in (0..l).rev() {
            let m: Vec<f64> = delta
                .iter()
                .zip(cache.a[idx].iter())
                .map(|(dl, t)| dl * (1.0 - t * t))
                .collect();
            grads[idx] = outer(&m, &cache.h[idx]);
            let back = self.blocks[idx].matvec_t(&m)?;
            for (dl, b) in delta.iter_mut().zip(back.iter()) {
                *dl += b;
            }
        }
        GradientSet::new(grads)
    }

    /// Applies one gradient step to the blocks.
    ///
    /// # Errors
    /// Propagates non-finite gradient entries.
    pub fn apply_step(&mut self, grads: &GradientSet, eta: f64) -> Result<()> {
        sgd_step(&mut self.blocks, grads, eta)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Mean squared error of the network over a row-per-sample dataset.
///
/// # Errors
/// Fails on dimension mismatches.
pub fn dataset_mse(net: &StackedNet, inputs: &Matrix, labels: &[f64]) -> Result<f64> {
    if inputs.rows() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} input rows vs {} labels",
            inputs.rows(),
            labels.len()
        )));
    }
    let mut acc = 0.0;
    for (i, label) in labels.iter().enumerate() {
        let pred = net.output(inputs.row(i))?;
        acc += (pred - label) * (pred - label);
    }
    Ok(acc / labels.len() as f64)
}

/// A frozen teacher network with Gaussian train/test inputs and its
/// noise-free outputs as labels.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    teacher: StackedNet,
    x_train: Matrix,
    y_train: Vec<f64>,
    x_test: Matrix,
    y_test: Vec<f64>,
}

impl SyntheticTask {
    #[must_use]
    pub fn teacher(&self) -> &StackedNet {
        &self.teacher
    }

    #[must_use]
    pub fn depth(&self) -> usize {
        self.teacher.depth()
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.teacher.dim()
    }

    #[must_use]
    pub fn num_train(&self) -> usize {
        self.x_train.rows()
    }

    #[must_use]
    pub fn num_test(&self) -> usize {
        self.x_test.rows()
    }
}

/// Builds a task from one stream: unit-norm readout, teacher blocks with
/// entries `N(0, 0.5/sqrt(d))`, then train and test inputs `N(0, 1)`.
///
/// # Errors
/// Fails when any count is zero.
pub fn make_task(
    depth: usize,
    dim: usize,
    n_train: usize,
    n_test: usize,
    teacher_seed: u64,
) -> Result<SyntheticTask> {
    if depth == 0 || dim == 0 || n_train == 0 || n_test == 0 {
        return Err(Error::InvalidArgument(format!(
            "task shape {depth}/{dim}/{n_train}/{n_test} must be positive"
        )));
    }
    let mut rng = Rng::new(teacher_seed);
    let mut readout: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let norm = dot(&readout, &readout).sqrt();
    if norm < 1e-12 {
        return Err(Error::InvalidArgument("degenerate readout sample".into()));
    }
    for c in &mut readout {
        *c /= norm;
    }
    let teacher_std = 0.5 / (dim as f64).sqrt();
    let blocks: Vec<Matrix> = (0..depth)
        .map(|_| gaussian_matrix(dim, dim, 0.0, teacher_std, &mut rng))
        .collect::<Result<_>>()?;
    let teacher = StackedNet::new(blocks, readout)?;
    let x_train = gaussian_matrix(n_train, dim, 0.0, 1.0, &mut rng)?;
    let x_test = gaussian_matrix(n_test, dim, 0.0, 1.0, &mut rng)?;
    let y_train = (0..n_train)
        .map(|i| teacher.output(x_train.row(i)))
        .collect::<Result<Vec<_>>>()?;
    let y_test = (0..n_test)
        .map(|i| teacher.output(x_test.row(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticTask {
        teacher,
        x_train,
        y_train,
        x_test,
        y_test,
    })
}

/// A finished stacked run; the trace holds pre-update metrics, the final
/// iterate's metrics live here.
#[derive(Debug, Clone)]
pub struct StackedRun {
    pub trace: Trace,
    pub net: StackedNet,
    pub initial_train_mse: f64,
    pub final_train_mse: f64,
    pub final_test_mse: f64,
}

/// Trains a fresh student: blocks drawn with entries `N(0, 0.2/sqrt(d))`
/// through the schedule's sharing shape (tie classes start equal), batch
/// indices drawn from the same stream afterwards.
///
/// # Errors
/// Fails when the schedule shape does not cover the task depth, or on
/// divergence.
pub fn train_stacked(
    task: &SyntheticTask,
    schedule: &SweSchedule,
    eta: f64,
    batch: usize,
    seed: u64,
    record_every: usize,
) -> Result<StackedRun> {
    let (d, l) = (task.dim(), task.depth());
    let mut rng = Rng::new(seed);
    let std = 0.2 / (d as f64).sqrt();
    let blocks = crate::swe_optim::equal_group_init(
        l,
        schedule.unit_size(),
        schedule.repeat_count(),
        |r| gaussian_matrix(d, d, 0.0, std, r).expect("positive std"),
        &mut rng,
    )?;
    let net = StackedNet::new(blocks, task.teacher.readout().to_vec())?;
    train_stacked_from(task, net, schedule, eta, batch, &mut rng, record_every)
}

/// Trains an explicit student net, drawing batch indices from `rng`.
///
/// # Errors
/// See [`train_stacked`].
pub fn train_stacked_from(
    task: &SyntheticTask,
    mut net: StackedNet,
    schedule: &SweSchedule,
    eta: f64,
    batch: usize,
    rng: &mut Rng,
    record_every: usize,
) -> Result<StackedRun> {
    if batch == 0 || record_every == 0 {
        return Err(Error::InvalidArgument(
            "batch size and record stride must be positive".into(),
        ));
    }
    schedule.validate_depth(net.depth())?;
    let schedule = schedule.with_learning_rate(LearningRate::Constant(eta));
    let n = task.num_train();
    let initial_train_mse = dataset_mse(&net, &task.x_train, &task.y_train)?;

    let mut trace = Trace::new(&STACKED_TRACE_COLUMNS);
    let total = schedule.total_steps();
    for t in 1..=total {
        if t == 1 || t % record_every == 0 || t == total {
            trace.push_row(vec![
                Some(t as f64),
                Some(dataset_mse(&net, &task.x_train, &task.y_train)?),
                Some(dataset_mse(&net, &task.x_test, &task.y_test)?),
            ])?;
        }
        let mut sums = vec![Matrix::zeros(net.dim(), net.dim()); net.depth()];
        let mut batch_mse = 0.0;
        for _ in 0..batch {
            let i = rng.below(n);
            let (pred, cache) = net.forward(task.x_train.row(i))?;
            let residual = pred - task.y_train[i];
            batch_mse += residual * residual;
            let sample = net.backward(&cache, 2.0 / batch as f64 * residual)?;
            for (acc, g) in sums.iter_mut().zip(sample.iter()) {
                acc.add_scaled_assign(g, 1.0)?;
            }
        }
        batch_mse /= batch as f64;
        if !batch_mse.is_finite() || batch_mse > 1e12 {
            return Err(Error::Diverged {
                step: t,
                loss: batch_mse,
                eta,
                trace: Box::new(trace),
            });
        }
        let grads = GradientSet::new(sums)?;
        let transformed = apply_schedule(&grads, &schedule, t)?;
        net.apply_step(&transformed, schedule.eta_at(t))?;
    }

    let final_train_mse = dataset_mse(&net, &task.x_train, &task.y_train)?;
    let final_test_mse = dataset_mse(&net, &task.x_test, &task.y_test)?;
    Ok(StackedRun {
        trace,
        net,
        initial_train_mse,
        final_train_mse,
        final_test_mse,
    })
}

/// One sweep observation: a configuration label, the student seed, and the
/// final held-out error.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: String,
    pub seed: u64,
    pub final_test_mse: f64,
}

/// Long-form sweep results with per-configuration medians.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    rows: Vec<SweepRow>,
}

impl SweepTable {
    #[must_use]
    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    /// Per-configuration medians of the final test MSE, in first-appearance
    /// order.
    #[must_use]
    pub fn medians(&self) -> Vec<(String, f64)> {
        let mut order: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !order.contains(&row.config.as_str()) {
                order.push(&row.config);
            }
        }
        order
            .into_iter()
            .map(|config| {
                let values: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.config == config)
                    .map(|r| r.final_test_mse)
                    .collect();
                (config.to_string(), median(&values).expect("nonempty group"))
            })
            .collect()
    }

    /// Long-form CSV: `config,seed,final_test_mse`.
    #[must_use]
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,seed,final_test_mse\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{}\n", row.config, row.seed, row.final_test_mse));
        }
        out
    }

    /// Summary CSV: `config,median_final_test_mse`.
    #[must_use]
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("config,median_final_test_mse\n");
        for (config, value) in self.medians() {
            out.push_str(&format!("{config},{value}\n"));
        }
        out
    }
}

/// Sweeps the untie point: for each fraction `f`, trains with
/// `untie = round(f * steps)` for student seeds `0..reps`.
///
/// # Errors
/// Fails unless the fractions lie in `[0, 1]` and include both endpoints.
#[allow(clippy::too_many_arguments)]
pub fn untie_sweep(
    task: &SyntheticTask,
    fractions: &[f64],
    reps: usize,
    steps: usize,
    eta: f64,
    batch: usize,
    record_every: usize,
) -> Result<SweepTable> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidArgument(
            "untie fractions must lie in [0, 1]".into(),
        ));
    }
    if !fractions.contains(&0.0) || !fractions.contains(&1.0) {
        return Err(Error::InvalidArgument(
            "untie fractions must include 0 and 1".into(),
        ));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one repetition".into()));
    }
    let mut table = SweepTable::default();
    for &fraction in fractions {
        let untie = (fraction * steps as f64).round() as usize;
        let schedule = SweSchedule::full_sharing(
            crate::swe_optim::SweMode::Swe,
            steps,
            untie,
            task.depth(),
            eta,
        )?;
        for seed in 0..reps as u64 {
            let run = train_stacked(task, &schedule, eta, batch, seed, record_every)?;
            table.rows.push(SweepRow {
                config: format!("frac={fraction}"),
                seed,
                final_test_mse: run.final_test_mse,
            });
        }
    }
    Ok(table)
}

/// Sweeps sharing shapes `(unit_size, repeat_count)`: each unit of
/// `unit_size` distinct layers is repeated `repeat_count` times.
///
/// # Errors
/// Fails when a shape does not cover the task depth.
#[allow(clippy::too_many_arguments)]
pub fn grouping_sweep(
    task: &SyntheticTask,
    shapes: &[(usize, usize)],
    reps: usize,
    steps: usize,
    untie: usize,
    eta: f64,
    batch: usize,
    record_every: usize,
) -> Result<SweepTable> {
    if reps == 0 || shapes.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs shapes and at least one repetition".into(),
        ));
    }
    let mut table = SweepTable::default();
    for &(unit, repeat) in shapes {
        if unit * repeat != task.depth() {
            return Err(Error::InvalidArgument(format!(
                "shape {unit}x{repeat} does not cover depth {}",
                task.depth()
            )));
        }
        let schedule = SweSchedule::new(
            crate::swe_optim::SweMode::Swe,
            steps,
            untie,
            unit,
            repeat,
            LearningRate::Constant(eta),
        )?;
        for seed in 0..reps as u64 {
            let run = train_stacked(task, &schedule, eta, batch, seed, record_every)?;
            table.rows.push(SweepRow {
                config: format!("{unit}x{repeat}"),
                seed,
                final_test_mse: run.final_test_mse,
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_math::rng::Rng;
    use crate::swe_optim::SweMode;

    fn tiny_task() -> SyntheticTask {
        make_task(4, 4, 24, 16, 1000).unwrap()
    }

    fn full_schedule(mode: SweMode, steps: usize, untie: usize, depth: usize) -> SweSchedule {
        SweSchedule::full_sharing(mode, steps, untie, depth, 0.05).unwrap()
    }

    #[test]
    fn zero_blocks_pass_input_through() {
        let net = StackedNet::new(
            vec![Matrix::zeros(3, 3); 5],
            vec![0.3, -1.2, 0.8],
        )
        .unwrap();
        let x = [0.5, 2.0, -1.0];
        let y = net.output(&x).unwrap();
        assert_eq!(y, dot(&[0.3, -1.2, 0.8], &x));
    }

    #[test]
    fn scalar_block_evaluates_by_hand() {
        let net = StackedNet::new(
            vec![Matrix::from_vec(1, 1, vec![0.5]).unwrap()],
            vec![1.0],
        )
        .unwrap();
        let y = net.output(&[1.0]).unwrap();
        assert!((y - (1.0 + 0.5_f64.tanh())).abs() <= 1e-15);
    }

    #[test]
    fn forward_matches_straight_line_reimplementation() {
        let mut rng = Rng::new(14);
        let blocks: Vec<Matrix> = (0..3)
            .map(|_| gaussian_matrix(4, 4, 0.0, 0.6, &mut rng).unwrap())
            .collect();
        let readout: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let net = StackedNet::new(blocks.clone(), readout.clone()).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();

        let mut h = x.clone();
        for w in &blocks {
            let mut next = h.clone();
            for (i, slot) in next.iter_mut().enumerate() {
                let mut u = 0.0;
                for (j, hj) in h.iter().enumerate() {
                    u += w.get(i, j) * hj;
                }
                *slot += u.tanh();
            }
            h = next;
        }
        let expected: f64 = readout.iter().zip(h.iter()).map(|(c, v)| c * v).sum();
        let y = net.output(&x).unwrap();
        assert!((y - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn backward_at_zero_weights_is_readout_times_input() {
        let readout = vec![0.7, -0.2];
        let net = StackedNet::new(vec![Matrix::zeros(2, 2); 3], readout.clone()).unwrap();
        let x = [1.5, -0.4];
        let (_, cache) = net.forward(&x).unwrap();
        let grads = net.backward(&cache, 1.0).unwrap();
        let expected = outer(&readout, &x);
        for g in grads.iter() {
            assert!(g.max_abs_diff(&expected).unwrap() == 0.0);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let h = 1e-5;
        for seed in [3u64, 4, 5] {
            let mut rng = Rng::new(seed);
            let blocks: Vec<Matrix> = (0..3)
                .map(|_| gaussian_matrix(3, 3, 0.0, 0.5, &mut rng).unwrap())
                .collect();
            let readout: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let net = StackedNet::new(blocks, readout).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();

            let (_, cache) = net.forward(&x).unwrap();
            let grads = net.backward(&cache, 1.0).unwrap();
            for l in 0..3 {
                let mut fd = Matrix::zeros(3, 3);
                for i in 0..3 {
                    for j in 0..3 {
                        let mut plus = net.clone();
                        let base = plus.blocks[l].get(i, j);
                        plus.blocks[l].set(i, j, base + h);
                        let mut minus = net.clone();
                        minus.blocks[l].set(i, j, base - h);
                        fd.set(
                            i,
                            j,
                            (plus.output(&x).unwrap() - minus.output(&x).unwrap()) / (2.0 * h),
                        );
                    }
                }
                let diff = grads.get(l).sub(&fd).unwrap().frob_norm();
                let scale = fd.frob_norm().max(1e-8);
                assert!(diff / scale <= 1e-5, "layer {l} rel err {}", diff / scale);
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_vanishes() {
        let mut rng = Rng::new(9);
        let net = StackedNet::new(
            vec![gaussian_matrix(2, 2, 0.0, 1.0, &mut rng).unwrap(); 2],
            vec![1.0, 2.0],
        )
        .unwrap();
        let (_, cache) = net.forward(&[0.3, 0.4]).unwrap();
        for g in net.backward(&cache, 0.0).unwrap().iter() {
            assert_eq!(g.max_abs(), 0.0);
        }
    }

    #[test]
    fn backward_rejects_foreign_caches() {
        let net3 = StackedNet::new(vec![Matrix::zeros(3, 3); 2], vec![1.0; 3]).unwrap();
        let net2 = StackedNet::new(vec![Matrix::zeros(2, 2); 2], vec![1.0; 2]).unwrap();
        let (_, cache) = net2.forward(&[1.0, 2.0]).unwrap();
        assert!(net3.backward(&cache, 1.0).is_err());
    }

    #[test]
    fn perfect_student_stays_at_zero_loss() {
        let task = tiny_task();
        let schedule = full_schedule(SweMode::Swe, 30, 10, 4);
        let mut rng = Rng::new(5);
        let run = train_stacked_from(
            &task,
            task.teacher().clone(),
            &schedule,
            0.05,
            8,
            &mut rng,
            1,
        )
        .unwrap();
        assert_eq!(run.initial_train_mse, 0.0);
        assert_eq!(run.final_train_mse, 0.0);
        for row in 0..run.trace.num_rows() {
            assert_eq!(run.trace.get(row, "train_mse").unwrap(), 0.0);
        }
    }

    #[test]
    fn tie_classes_stay_bitwise_equal_while_shared() {
        let task = tiny_task();
        // Shape 2x2: positions within each unit tie across the two units.
        let shared = SweSchedule::new(SweMode::AlwaysShared, 50, 50, 2, 2, LearningRate::Constant(0.05)).unwrap();
        let run = train_stacked(&task, &shared, 0.05, 8, 7, 10).unwrap();
        let b = run.net.blocks();
        assert_eq!(b[0], b[2]);
        assert_eq!(b[1], b[3]);
        assert_ne!(b[0], b[1]);

        // Under the untying schedule the last step (t = untie) is already
        // per-layer, so the classes split.
        let untying = SweSchedule::new(SweMode::Swe, 50, 50, 2, 2, LearningRate::Constant(0.05)).unwrap();
        let split = train_stacked(&task, &untying, 0.05, 8, 7, 10).unwrap();
        assert_ne!(split.net.blocks()[0], split.net.blocks()[2]);
    }

    #[test]
    fn boundary_schedules_match_plain_modes_bitwise() {
        let task = tiny_task();
        let (steps, batch, eta) = (40, 8, 0.05);

        let untied = train_stacked(&task, &full_schedule(SweMode::Swe, steps, 0, 4), eta, batch, 3, 1).unwrap();
        let plain = train_stacked(&task, &full_schedule(SweMode::NoSharing, steps, 0, 4), eta, batch, 3, 1).unwrap();
        assert_eq!(untied.trace.to_csv(), plain.trace.to_csv());
        assert_eq!(untied.final_test_mse, plain.final_test_mse);

        let tied = train_stacked(&task, &full_schedule(SweMode::Swe, steps, steps, 4), eta, batch, 3, 1).unwrap();
        let always = train_stacked(&task, &full_schedule(SweMode::AlwaysShared, steps, steps, 4), eta, batch, 3, 1).unwrap();
        assert_eq!(tied.trace.to_csv(), always.trace.to_csv());
    }

    #[test]
    fn equal_gradients_make_shared_and_plain_steps_agree() {
        // At the all-zero initialization every block receives the same
        // gradient, so one shared step equals one plain step up to the
        // rounding of the averaged sum.
        let task = tiny_task();
        let zero = StackedNet::new(
            vec![Matrix::zeros(4, 4); 4],
            task.teacher().readout().to_vec(),
        )
        .unwrap();
        let shared = train_stacked_from(
            &task,
            zero.clone(),
            &full_schedule(SweMode::AlwaysShared, 1, 1, 4),
            0.05,
            8,
            &mut Rng::new(11),
            1,
        )
        .unwrap();
        let plain = train_stacked_from(
            &task,
            zero,
            &full_schedule(SweMode::NoSharing, 1, 0, 4),
            0.05,
            8,
            &mut Rng::new(11),
            1,
        )
        .unwrap();
        for (a, b) in shared.net.blocks().iter().zip(plain.net.blocks().iter()) {
            let scale = b.max_abs().max(1e-12);
            assert!(a.max_abs_diff(b).unwrap() <= 1e-14 * scale);
        }
    }

    #[test]
    fn determinism_of_seeded_runs() {
        let task = tiny_task();
        let schedule = full_schedule(SweMode::Swe, 25, 5, 4);
        let a = train_stacked(&task, &schedule, 0.05, 8, 21, 1).unwrap();
        let b = train_stacked(&task, &schedule, 0.05, 8, 21, 1).unwrap();
        assert_eq!(a.trace.to_csv(), b.trace.to_csv());
        assert_eq!(a.net, b.net);
    }

    #[test]
    fn untie_sweep_structure_and_boundaries() {
        let task = tiny_task();
        let table = untie_sweep(&task, &[0.0, 0.5, 1.0], 2, 30, 0.05, 8, 30).unwrap();
        assert_eq!(table.rows().len(), 6);
        let medians = table.medians();
        assert_eq!(medians.len(), 3);
        assert_eq!(medians[0].0, "frac=0");
        assert_eq!(medians[2].0, "frac=1");

        // Fraction 0 reproduces the plain run for the same seed.
        let plain = train_stacked(&task, &full_schedule(SweMode::NoSharing, 30, 0, 4), 0.05, 8, 0, 30).unwrap();
        assert_eq!(table.rows()[0].final_test_mse, plain.final_test_mse);

        assert!(untie_sweep(&task, &[0.0, 1.5, 1.0], 2, 30, 0.05, 8, 30).is_err());
        assert!(untie_sweep(&task, &[0.0, 0.5], 2, 30, 0.05, 8, 30).is_err());
    }

    #[test]
    fn grouping_sweep_covers_shapes_and_boundaries() {
        let task = tiny_task();
        let table = grouping_sweep(
            &task,
            &[(4, 1), (2, 2), (1, 4)],
            2,
            30,
            3,
            0.05,
            8,
            30,
        )
        .unwrap();
        assert_eq!(table.rows().len(), 6);
        assert_eq!(table.medians()[0].0, "4x1");

        // One unit of all distinct layers shares nothing: equal to the plain
        // baseline with the same (trivially grouped) initialization.
        let baseline = train_stacked(
            &task,
            &SweSchedule::new(SweMode::NoSharing, 30, 0, 4, 1, LearningRate::Constant(0.05)).unwrap(),
            0.05,
            8,
            0,
            30,
        )
        .unwrap();
        assert_eq!(table.rows()[0].final_test_mse, baseline.final_test_mse);

        assert!(grouping_sweep(&task, &[(3, 2)], 1, 30, 3, 0.05, 8, 30).is_err());
    }

    #[test]
    fn sweep_csv_shapes() {
        let table = SweepTable {
            rows: vec![
                SweepRow { config: "frac=0".into(), seed: 0, final_test_mse: 0.5 },
                SweepRow { config: "frac=0".into(), seed: 1, final_test_mse: 0.25 },
                SweepRow { config: "frac=1".into(), seed: 0, final_test_mse: 2.0 },
            ],
        };
        assert_eq!(
            table.to_csv(),
            "config,seed,final_test_mse\nfrac=0,0,0.5\nfrac=0,1,0.25\nfrac=1,0,2\n"
        );
        assert_eq!(
            table.summary_csv(),
            "config,median_final_test_mse\nfrac=0,0.375\nfrac=1,2\n"
        );
    }
}
