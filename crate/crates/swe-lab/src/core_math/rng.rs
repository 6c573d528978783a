//! Deterministic random sampling.
//!
//! A self-contained splitmix64 generator with Box–Muller normals. The point
//! is bit-exact reproducibility: the same seed yields the same stream on
//! every platform, which the golden-value tests below freeze permanently.

use crate::core_math::matrix::Matrix;
use crate::error::{Error, Result};

/// Splitmix64 pseudo-random generator with a cached Box–Muller spare.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
    cached_normal: Option<f64>,
}

impl Rng {
    #[must_use]
    pub fn new(seed: u64) -> Self {
        Rng {
            state: seed,
            cached_normal: None,
        }
    }

    /// Next raw 64-bit value of the splitmix64 stream.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via Box–Muller; pairs are generated together and
    /// the second member is cached for the next call.
    pub fn normal(&mut self) -> f64 {
        if let Some(spare) = self.cached_normal.take() {
            return spare;
        }
        let mut u1 = self.uniform();
        while u1 == 0.0 {
            u1 = self.uniform();
        }
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Index in `[0, n)` for seeded shuffling and batch sampling.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }
}

/// Matrix with i.i.d. `N(mean, std^2)` entries, filled row-major.
///
/// # Errors
/// Fails when `std < 0`.
pub fn gaussian_matrix(rows: usize, cols: usize, mean: f64, std: f64, rng: &mut Rng) -> Result<Matrix> {
    if std < 0.0 {
        return Err(Error::InvalidArgument(format!("negative std {std}")));
    }
    let data: Vec<f64> = (0..rows * cols).map(|_| mean + std * rng.normal()).collect();
    Matrix::from_vec(rows, cols, data)
}
