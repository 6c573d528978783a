//! Dense linear algebra, symmetric eigensolving, and deterministic sampling.

pub mod eigen;
pub mod matrix;
pub mod rng;
pub mod stats;

pub use eigen::{sigma_min, spd_extremes, sym_eig, EigenResult, MAX_EIG_DIM};
pub use matrix::{chain_product, outer, Matrix};
pub use rng::{gaussian_matrix, Rng};
pub use stats::{median, percentile};
