//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Everything an experiment needs spectrally — step-size bounds, positive
//! definiteness checks, singular values of small targets — funnels through
//! [`sym_eig`]. Matrices here are at most 64x64, so a plain Jacobi sweep is
//! both simple and accurate; speed is irrelevant at this scale.

use crate::core_math::matrix::Matrix;
use crate::error::{Error, Result};

/// Maximum dimension accepted by [`sym_eig`].
pub const MAX_EIG_DIM: usize = 64;

const MAX_SWEEPS: usize = 100;
const OFF_DIAG_FACTOR: f64 = 1e-12;
const SYMMETRY_REL_TOL: f64 = 1e-10;

/// Eigenvalues (ascending) and matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenResult {
    #[must_use]
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    #[must_use]
    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }
}

/// Frobenius norm of the strictly off-diagonal part.
fn off_diag_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = m.get(i, j);
                acc += v * v;
            }
        }
    }
    acc.sqrt()
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Sweeps rotate every off-diagonal pair in row order until the off-diagonal
/// Frobenius norm drops below `1e-12 * ||A||_F`, then sorts the spectrum
/// ascending and permutes the eigenvector columns to match.
///
/// # Errors
/// - matrix not square, empty, or larger than 64x64
/// - asymmetry beyond `1e-10 * ||A||_F`
/// - no convergence within 100 sweeps
pub fn sym_eig(a: &Matrix) -> Result<EigenResult> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "sym_eig needs a nonempty square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n > MAX_EIG_DIM {
        return Err(Error::InvalidArgument(format!(
            "sym_eig supports dimension <= {MAX_EIG_DIM}, got {n}"
        )));
    }
    let fro = a.frob_norm();
    let sym_tol = SYMMETRY_REL_TOL * fro;
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((a.get(i, j) - a.get(j, i)).abs());
        }
    }
    if asym > sym_tol {
        return Err(Error::NotSymmetric {
            residual: asym,
            tolerance: sym_tol,
        });
    }

    let mut m = a.symmetrized()?;
    let mut v = Matrix::identity(n);
    let threshold = OFF_DIAG_FACTOR * fro;

    let mut converged = off_diag_norm(&m) <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = m.get(p, p);
                let aqq = m.get(q, q);
                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    let nkp = akp - s * (akq + tau * akp);
                    let nkq = akq + s * (akp - tau * akq);
                    m.set(k, p, nkp);
                    m.set(p, k, nkp);
                    m.set(k, q, nkq);
                    m.set(q, k, nkq);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp - s * (vkq + tau * vkp));
                    v.set(k, q, vkq + s * (vkp - tau * vkq));
                }
            }
        }
        sweeps += 1;
        converged = off_diag_norm(&m) <= threshold;
    }
    if !converged {
        return Err(Error::EigenNoConvergence {
            sweeps,
            off_norm: off_diag_norm(&m),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).partial_cmp(&m.get(j, j)).expect("finite eigenvalues"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors.set(k, new_col, v.get(k, old_col));
        }
    }
    Ok(EigenResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Smallest singular value of a square (possibly asymmetric) matrix,
/// computed as `sqrt(lambda_min(A^T A))`.
///
/// # Errors
/// Propagates [`sym_eig`] failures on `A^T A`.
pub fn sigma_min(a: &Matrix) -> Result<f64> {
    let gram = a.transpose().matmul(a)?;
    let eig = sym_eig(&gram)?;
    Ok(eig.lambda_min().max(0.0).sqrt())
}

/// Eigenvalue extremes `(lambda_min, lambda_max)` of a symmetric positive
/// definite matrix.
///
/// # Errors
/// Fails when the matrix is asymmetric or its smallest eigenvalue is not
/// strictly positive.
pub fn spd_extremes(a: &Matrix) -> Result<(f64, f64)> {
    let eig = sym_eig(a)?;
    let lo = eig.lambda_min();
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite { lambda_min: lo });
    }
    Ok((lo, eig.lambda_max()))
}
