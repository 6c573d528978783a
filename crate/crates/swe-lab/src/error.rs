//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Error`]. The CLI maps
//! categories to process exit codes, so each variant carries enough context
//! to be actionable without a debugger.

use crate::trace::Trace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols} ({context})")]
    DimMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric: max |A - A^T| entry {residual:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { residual: f64, tolerance: f64 },

    #[error("matrix is not symmetric positive definite: smallest eigenvalue {lambda_min:.6e}")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    EigenNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("non-finite value in {context} at layer {layer}")]
    NonFinite { context: &'static str, layer: usize },

    #[error("training diverged at step {step}: loss {loss:.6e} (eta {eta:.6e})")]
    Diverged {
        step: usize,
        loss: f64,
        eta: f64,
        /// Partial trace up to the failing step, for post-mortem dumps.
        trace: Box<Trace>,
    },

    #[error("gram matrix is numerically singular (pivot {pivot:.3e} at row {row})")]
    SingularGram { pivot: f64, row: usize },

    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv at line {line}: {message}")]
    Csv { line: usize, message: String },
}

impl Error {
    pub fn config(violations: Vec<String>) -> Self {
        Error::Config(violations)
    }

    /// Exit-code category used by the CLI: 2 for configuration problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Io { .. } | Error::Csv { .. } => 2,
            _ => 3,
        }
    }
}
