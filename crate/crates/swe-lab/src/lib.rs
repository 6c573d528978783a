//! Numerical laboratory for weight-sharing training schedules: deep linear
//! networks with provable step sizes, an overparameterized linear-regression
//! testbed, and a nonlinear residual stack, driven by a batch harness.

pub mod core_math;
pub mod deep_linear;
pub mod error;
pub mod harness;
pub mod regression;
pub mod stacked;
pub mod swe_optim;
pub mod trace;

pub use error::{Error, Result};
