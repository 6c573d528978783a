//! Order statistics for run summaries.

use crate::error::{Error, Result};

/// Median: middle element for odd counts, mean of the two middles for even.
///
/// # Errors
/// Fails on an empty slice.
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("median of an empty slice".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        Ok(sorted[n / 2])
    } else {
        Ok((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

/// Percentile by linear interpolation between closest ranks:
/// rank `q/100 * (n-1)` over the sorted values.
///
/// # Errors
/// Fails on an empty slice or `q` outside `[0, 100]`.
pub fn percentile(xs: &[f64], q: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty slice".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "percentile {q} outside [0, 100]"
        )));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        Ok(sorted[lo])
    } else {
        Ok(sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac)
    }
}
