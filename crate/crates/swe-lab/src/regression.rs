//! Under-determined linear regression trained by plain gradient descent
//! versus the share-then-unshare schedule.
//!
//! The model is `y_hat = x^T w` with more coordinates than training samples;
//! all coordinates form one sharing group, so the shared phase trains a
//! single scalar along the all-ones direction. The module carries the exact
//! least-squares optimum of that scalar model, the minimum-norm interpolant
//! (the plain-GD-from-zero limit), and the error-scaling scan over problem
//! shapes.

use std::collections::BTreeMap;

use crate::core_math::matrix::Matrix;
use crate::core_math::rng::{gaussian_matrix, Rng};
use crate::error::{Error, Result};
use crate::swe_optim::{apply_schedule, GradientSet, LearningRate, SweSchedule};
use crate::trace::Trace;

/// Column layout of regression training traces. Row `t` (t = 1..T) records
/// the weights *entering* step `t`, i.e. after `t-1` updates; metrics of the
/// final iterate live on [`RegressionRun`], not in the trace.
pub const REGRESSION_TRACE_COLUMNS: [&str; 7] = [
    "step",
    "train_mse",
    "test_mse",
    "head_mean",
    "tail_mean",
    "err_to_w_star",
    "err_to_stem",
];

/// Column layout of error-scaling scan tables.
pub const SCAN_COLUMNS: [&str; 6] = [
    "L",
    "n",
    "seed",
    "err_stem",
    "stem_norm",
    "ratio_sqrt_L_over_n",
];

/// A noise-free regression instance: `y = X w*` with held-out test data.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    x: Matrix,
    y: Vec<f64>,
    w_star: Vec<f64>,
    x_test: Matrix,
    y_test: Vec<f64>,
}

impl RegressionProblem {
    /// Assembles a problem from an explicit design and ground truth;
    /// responses are computed noise-free.
    ///
    /// # Errors
    /// Fails on dimension mismatches or empty data.
    pub fn from_parts(x: Matrix, w_star: Vec<f64>, x_test: Matrix) -> Result<Self> {
        let l = w_star.len();
        if l == 0 || x.rows() == 0 || x_test.rows() == 0 {
            return Err(Error::InvalidArgument(
                "regression problem needs at least one coordinate, train row, and test row".into(),
            ));
        }
        if x.cols() != l || x_test.cols() != l {
            return Err(Error::InvalidArgument(format!(
                "design has {} columns, test design {}, ground truth {l}",
                x.cols(),
                x_test.cols()
            )));
        }
        let y = x.matvec(&w_star)?;
        let y_test = x_test.matvec(&w_star)?;
        Ok(RegressionProblem {
            x,
            y,
            w_star,
            x_test,
            y_test,
        })
    }

    #[must_use]
    pub fn num_train(&self) -> usize {
        self.x.rows()
    }

    #[must_use]
    pub fn num_test(&self) -> usize {
        self.x_test.rows()
    }

    #[must_use]
    pub fn dims(&self) -> usize {
        self.w_star.len()
    }

    #[must_use]
    pub fn design(&self) -> &Matrix {
        &self.x
    }

    #[must_use]
    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    #[must_use]
    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    /// The stem of the ground truth: `mean(w*) * ones`.
    #[must_use]
    pub fn stem_star(&self) -> Vec<f64> {
        stem_projection(&self.w_star)
    }

    /// The branch of the ground truth: `w* - stem`.
    #[must_use]
    pub fn branch_star(&self) -> Vec<f64> {
        let stem = self.stem_star();
        self.w_star.iter().zip(stem.iter()).map(|(w, s)| w - s).collect()
    }

    /// Training mean squared error `(1/n) sum_i (x_i^T w - y_i)^2`.
    ///
    /// # Errors
    /// Fails on a wrong-length weight vector.
    pub fn train_mse(&self, w: &[f64]) -> Result<f64> {
        mse(&self.x, &self.y, w)
    }

    /// Held-out mean squared error.
    ///
    /// # Errors
    /// Fails on a wrong-length weight vector.
    pub fn test_mse(&self, w: &[f64]) -> Result<f64> {
        mse(&self.x_test, &self.y_test, w)
    }

    /// Least-squares gradient `(2/n) X^T (X w - y)`.
    ///
    /// # Errors
    /// Fails on a wrong-length weight vector.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let n = self.num_train() as f64;
        let mut r = self.x.matvec(w)?;
        for (ri, yi) in r.iter_mut().zip(self.y.iter()) {
            *ri -= yi;
        }
        let mut g = self.x.matvec_t(&r)?;
        for gi in &mut g {
            *gi *= 2.0 / n;
        }
        Ok(g)
    }
}

fn mse(x: &Matrix, y: &[f64], w: &[f64]) -> Result<f64> {
    let pred = x.matvec(w)?;
    let n = y.len() as f64;
    Ok(pred
        .iter()
        .zip(y.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Samples a problem: ground truth `w* ~ N(1, 1)` element-wise, isotropic
/// standard-Gaussian design rows for train and test, noise-free responses.
/// Draw order from one stream: `w*`, then the training design (row-major),
/// then the test design.
///
/// # Errors
/// Fails when any count is zero.
pub fn make_problem(dims: usize, num_train: usize, num_test: usize, seed: u64) -> Result<RegressionProblem> {
    if dims == 0 || num_train == 0 || num_test == 0 {
        return Err(Error::InvalidArgument(format!(
            "problem shape {dims}x{num_train}/{num_test} must be positive"
        )));
    }
    let mut rng = Rng::new(seed);
    let w_star: Vec<f64> = (0..dims).map(|_| 1.0 + rng.normal()).collect();
    let x = gaussian_matrix(num_train, dims, 0.0, 1.0, &mut rng)?;
    let x_test = gaussian_matrix(num_test, dims, 0.0, 1.0, &mut rng)?;
    RegressionProblem::from_parts(x, w_star, x_test)
}

/// Projects onto the all-ones direction: `mean(w) * ones`.
#[must_use]
pub fn stem_projection(w: &[f64]) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    vec![mean; w.len()]
}

/// Means of the first and last `block` coordinates.
///
/// # Errors
/// Fails when `block == 0` or the blocks would overlap.
pub fn block_means(w: &[f64], block: usize) -> Result<(f64, f64)> {
    if block == 0 || 2 * block > w.len() {
        return Err(Error::InvalidArgument(format!(
            "block {block} invalid for a vector of {} coordinates",
            w.len()
        )));
    }
    let head = w[..block].iter().sum::<f64>() / block as f64;
    let tail = w[w.len() - block..].iter().sum::<f64>() / block as f64;
    Ok((head, tail))
}

/// Exact least-squares optimum of the fully-shared scalar model
/// `y_i ~ w0 * (x_i^T ones)`:
/// `w0 = mean(w*) + sum_i(s_i * x_i^T branch) / sum_i(s_i^2)` with
/// `s_i = x_i^T ones`.
///
/// # Errors
/// Fails when the denominator `sum_i(s_i^2)` vanishes.
pub fn shared_phase_closed_form(p: &RegressionProblem) -> Result<f64> {
    let ones = vec![1.0; p.dims()];
    let s = p.x.matvec(&ones)?;
    let branch = p.branch_star();
    let cross = p.x.matvec(&branch)?;
    let denom: f64 = s.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return Err(Error::InvalidArgument(
            "shared scalar model is degenerate: design rows are orthogonal to the ones direction"
                .into(),
        ));
    }
    let numer: f64 = s.iter().zip(cross.iter()).map(|(a, b)| a * b).sum();
    let stem_mean = p.w_star.iter().sum::<f64>() / p.dims() as f64;
    Ok(stem_mean + numer / denom)
}

/// Minimum-Euclidean-norm interpolant `X^T (X X^T)^{-1} y` — the limit of
/// plain gradient descent from the zero initialization.
///
/// # Errors
/// Fails when the Gram matrix is numerically singular.
pub fn min_norm_solution(p: &RegressionProblem) -> Result<Vec<f64>> {
    let gram = p.x.matmul(&p.x.transpose())?;
    let alpha = solve_linear(gram, p.y.clone())?;
    p.x.matvec_t(&alpha)
}

/// Gaussian elimination with partial pivoting; consumes its inputs.
fn solve_linear(mut a: Matrix, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a.max_abs().max(1e-300);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a.get(r, col)))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("nonempty range");
        if pivot.abs() <= 1e-13 * scale {
            return Err(Error::SingularGram { pivot, row: col });
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = a.get(col, j);
                a.set(col, j, a.get(pivot_row, j));
                a.set(pivot_row, j, tmp);
            }
            b.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let factor = a.get(r, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a.set(r, j, a.get(r, j) - factor * a.get(col, j));
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= a.get(row, j) * x[j];
        }
        x[row] = acc / a.get(row, row);
    }
    Ok(x)
}

/// Stable default step size `1 / (2 lambda_max(X^T X / n))`, the largest
/// rate at which every residual mode of the quadratic strictly contracts.
/// The top eigenvalue comes from power iteration (the design can exceed the
/// dense eigensolver's size limit).
///
/// # Errors
/// Fails when the design is numerically zero.
pub fn auto_eta(p: &RegressionProblem) -> Result<f64> {
    let lmax = top_covariance_eigenvalue(p)?;
    Ok(1.0 / (2.0 * lmax))
}

fn top_covariance_eigenvalue(p: &RegressionProblem) -> Result<f64> {
    let l = p.dims();
    let n = p.num_train() as f64;
    let mut v = vec![1.0 / (l as f64).sqrt(); l];
    let mut estimate = 0.0_f64;
    for _ in 0..10_000 {
        let xv = p.x.matvec(&v)?;
        let mut next = p.x.matvec_t(&xv)?;
        for c in &mut next {
            *c /= n;
        }
        let norm = next.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(
                "design matrix is numerically zero".into(),
            ));
        }
        let new_estimate = next.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
        for c in &mut next {
            *c /= norm;
        }
        v = next;
        if (new_estimate - estimate).abs() <= 1e-12 * new_estimate.abs() {
            return Ok(new_estimate);
        }
        estimate = new_estimate;
    }
    Ok(estimate)
}

/// A finished regression run. The trace stops at the weights entering the
/// last step; the fields carry the final iterate and its metrics.
#[derive(Debug, Clone)]
pub struct RegressionRun {
    pub trace: Trace,
    pub final_w: Vec<f64>,
    pub eta: f64,
    pub initial_train_mse: f64,
    pub final_train_mse: f64,
    pub final_test_mse: f64,
}

/// Trains `w` from zero under the schedule (one sharing group spanning all
/// coordinates). `eta = None` resolves through [`auto_eta`].
///
/// # Errors
/// Fails when the schedule depth differs from the problem dimension, or on
/// divergence (train MSE above 1e12), reporting the offending step size.
pub fn train_regression(
    p: &RegressionProblem,
    schedule: &SweSchedule,
    eta: Option<f64>,
) -> Result<RegressionRun> {
    schedule.validate_depth(p.dims())?;
    let eta = match eta {
        Some(v) => v,
        None => auto_eta(p)?,
    };
    let schedule = schedule.with_learning_rate(LearningRate::Constant(eta));
    let l = p.dims();
    let block = l / 2;
    let mut w = vec![0.0_f64; l];
    let initial_train_mse = p.train_mse(&w)?;

    let mut trace = Trace::new(&REGRESSION_TRACE_COLUMNS);
    for t in 1..=schedule.total_steps() {
        record_regression_row(&mut trace, p, &w, t, block)?;
        let g = p.gradient(&w)?;
        let grads = GradientSet::new(
            g.into_iter()
                .map(|v| Matrix::from_vec(1, 1, vec![v]).expect("1x1"))
                .collect(),
        )?;
        let transformed = apply_schedule(&grads, &schedule, t)?;
        let eta_t = schedule.eta_at(t);
        for (k, wk) in w.iter_mut().enumerate() {
            *wk -= eta_t * transformed.get(k).get(0, 0);
        }
        let train = p.train_mse(&w)?;
        if !train.is_finite() || train > 1e12 {
            record_regression_row(&mut trace, p, &w, t + 1, block)?;
            return Err(Error::Diverged {
                step: t,
                loss: train,
                eta,
                trace: Box::new(trace),
            });
        }
    }

    let final_train_mse = p.train_mse(&w)?;
    let final_test_mse = p.test_mse(&w)?;
    Ok(RegressionRun {
        trace,
        final_w: w,
        eta,
        initial_train_mse,
        final_train_mse,
        final_test_mse,
    })
}

fn record_regression_row(
    trace: &mut Trace,
    p: &RegressionProblem,
    w: &[f64],
    step: usize,
    block: usize,
) -> Result<()> {
    let (head, tail) = if w.len() == 1 {
        (w[0], w[0])
    } else {
        block_means(w, block)?
    };
    let err_star = norm_of_diff(w, &p.w_star);
    let err_stem = norm_of_diff(w, &p.stem_star());
    trace.push_row(vec![
        Some(step as f64),
        Some(p.train_mse(w)?),
        Some(p.test_mse(w)?),
        Some(head),
        Some(tail),
        Some(err_star),
        Some(err_stem),
    ])
}

fn norm_of_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Error-scaling scan: for every `(dims, num_train, seed)` cell, the
/// distance from the closed-form shared solution to the true stem,
/// `||w0*ones - stem(w*)|| = sqrt(L) |w0 - mean(w*)|`, alongside the stem
/// norm and the ratio against `sqrt(L/n)`.
///
/// # Errors
/// Fails on empty grids or a degenerate cell.
pub fn prop1_error_scan(l_grid: &[usize], n_grid: &[usize], seeds: &[u64]) -> Result<Trace> {
    if l_grid.is_empty() || n_grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("scan grids must be nonempty".into()));
    }
    let mut table = Trace::new(&SCAN_COLUMNS);
    for &l in l_grid {
        for &n in n_grid {
            for &seed in seeds {
                let p = make_problem(l, n, 1, seed)?;
                let w0 = shared_phase_closed_form(&p)?;
                let stem_mean = p.w_star.iter().sum::<f64>() / l as f64;
                let sqrt_l = (l as f64).sqrt();
                let err_stem = sqrt_l * (w0 - stem_mean).abs();
                let stem_norm = sqrt_l * stem_mean.abs();
                let ratio = err_stem / (l as f64 / n as f64).sqrt();
                table.push_row(vec![
                    Some(l as f64),
                    Some(n as f64),
                    Some(seed as f64),
                    Some(err_stem),
                    Some(stem_norm),
                    Some(ratio),
                ])?;
            }
        }
    }
    Ok(table)
}

/// Log-log slope of the per-cell mean `err_stem` against `L/n`, fitted by
/// least squares over the distinct `(L, n)` cells of a scan table.
///
/// # Errors
/// Fails when the table is empty or every cell shares one `L/n` value.
pub fn fit_loglog_slope(table: &Trace) -> Result<f64> {
    let ls = table.column("L")?;
    let ns = table.column("n")?;
    let errs = table.column("err_stem")?;
    let mut cells: BTreeMap<(u64, u64), (f64, usize)> = BTreeMap::new();
    for ((l, n), e) in ls.iter().zip(ns.iter()).zip(errs.iter()) {
        let (Some(l), Some(n), Some(e)) = (l, n, e) else { continue };
        let entry = cells.entry((*l as u64, *n as u64)).or_insert((0.0, 0));
        entry.0 += e;
        entry.1 += 1;
    }
    if cells.is_empty() {
        return Err(Error::InvalidArgument("scan table has no complete rows".into()));
    }
    let points: Vec<(f64, f64)> = cells
        .iter()
        .map(|(&(l, n), &(sum, count))| {
            let ratio = l as f64 / n as f64;
            (ratio.ln(), (sum / count as f64).ln())
        })
        .collect();
    let m = points.len() as f64;
    let mean_u = points.iter().map(|(u, _)| u).sum::<f64>() / m;
    let mean_v = points.iter().map(|(_, v)| v).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|(u, _)| (u - mean_u) * (u - mean_u)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument(
            "log-log fit needs at least two distinct L/n ratios".into(),
        ));
    }
    let sxy: f64 = points
        .iter()
        .map(|(u, v)| (u - mean_u) * (v - mean_v))
        .sum();
    Ok(sxy / sxx)
}
