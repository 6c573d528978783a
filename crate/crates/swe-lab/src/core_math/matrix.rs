//! Dense row-major matrices in double precision.
//!
//! This is the universal numeric carrier for the whole crate: weights,
//! gradients, data matrices, and targets are all [`Matrix`] values. The
//! implementation favors determinism over speed — every reduction runs in a
//! fixed left-to-right order so that repeated runs are bit-identical.

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix of `f64`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Square identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data.
    ///
    /// # Errors
    /// Fails when `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix data length {} does not match shape {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equal-length rows.
    ///
    /// # Errors
    /// Fails on ragged input or zero rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidArgument("from_rows needs at least one row".into()));
        };
        let cols = first.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row {} has length {}, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    #[must_use]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[must_use]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[must_use]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[must_use]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    #[must_use]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a slice.
    #[must_use]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// True when every entry is finite (no NaN / infinity).
    #[must_use]
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix product `self * other`.
    ///
    /// Accumulates each entry left-to-right over the inner index, so the
    /// result is deterministic across runs and platforms.
    ///
    /// # Errors
    /// Fails when `self.cols != other.rows`; the message reports both shapes.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
                context: "matmul",
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.data[i * self.cols + k] * other.data[k * other.cols + j];
                }
                out.data[i * other.cols + j] = acc;
            }
        }
        Ok(out)
    }

    #[must_use]
    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Entry-wise sum.
    ///
    /// # Errors
    /// Fails on shape mismatch.
    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    /// Entry-wise difference `self - other`.
    ///
    /// # Errors
    /// Fails on shape mismatch.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    #[must_use]
    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// In-place `self += factor * other`, the SGD work-horse.
    ///
    /// # Errors
    /// Fails on shape mismatch.
    pub fn add_scaled_assign(&mut self, other: &Matrix, factor: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_error(other, "add_scaled_assign"));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Frobenius inner product `<self, other> = sum_ij a_ij * b_ij`.
    ///
    /// # Errors
    /// Fails on shape mismatch.
    pub fn frob_inner(&self, other: &Matrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_error(other, "frob_inner"));
        }
        let mut acc = 0.0;
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            acc += a * b;
        }
        Ok(acc)
    }

    /// Frobenius norm, `sqrt(frob_inner(self, self))`.
    #[must_use]
    pub fn frob_norm(&self) -> f64 {
        let mut acc = 0.0;
        for v in &self.data {
            acc += v * v;
        }
        acc.sqrt()
    }

    /// Largest absolute entry (0 for an empty matrix).
    #[must_use]
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry-wise difference; shapes must already match.
    ///
    /// # Errors
    /// Fails on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_error(other, "max_abs_diff"));
        }
        let mut m = 0.0_f64;
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            m = m.max((a - b).abs());
        }
        Ok(m)
    }

    /// Symmetric part `(self + self^T) / 2` of a square matrix.
    ///
    /// # Errors
    /// Fails when the matrix is not square.
    pub fn symmetrized(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::InvalidArgument(format!(
                "symmetrized needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `self * x`.
    ///
    /// # Errors
    /// Fails when `x.len() != self.cols`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::InvalidArgument(format!(
                "matvec: vector length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Transposed matrix-vector product `self^T * x`.
    ///
    /// # Errors
    /// Fails when `x.len() != self.rows`.
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::InvalidArgument(format!(
                "matvec_t: vector length {} does not match {} rows",
                x.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += xi * a;
            }
        }
        Ok(out)
    }

    fn zip_with(&self, other: &Matrix, context: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(self.shape_error(other, context));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    fn shape_error(&self, other: &Matrix, context: &'static str) -> Error {
        Error::DimMismatch {
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: other.rows,
            right_cols: other.cols,
            context,
        }
    }
}

/// Outer product `u * v^T` as a `u.len() x v.len()` matrix.
#[must_use]
pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(u.len(), v.len());
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            out.set(i, j, ui * vj);
        }
    }
    out
}

/// Product `W_hi * W_{hi-1} * ... * W_lo` over 1-based inclusive indices.
///
/// The empty range `lo == hi + 1` returns the identity sized like the first
/// matrix of the sequence.
///
/// # Errors
/// Fails when the sequence is empty, the indices fall outside
/// `1 <= lo <= hi + 1 <= len + 1`, or a product step has mismatched shapes.
pub fn chain_product(ws: &[Matrix], lo: usize, hi: usize) -> Result<Matrix> {
    let Some(first) = ws.first() else {
        return Err(Error::InvalidArgument("chain_product over an empty sequence".into()));
    };
    if lo < 1 || lo > hi + 1 || hi > ws.len() {
        return Err(Error::InvalidArgument(format!(
            "chain_product range {}..={} out of bounds for {} matrices",
            lo,
            hi,
            ws.len()
        )));
    }
    let mut acc = Matrix::identity(first.rows());
    for w in &ws[lo - 1..hi] {
        acc = w.matmul(&acc)?;
    }
    Ok(acc)
}
