//! Small descriptive-statistics helpers shared across modules.

use crate::error::{DfaError, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divides by n - 1). Zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Empirical quantile of an already sorted slice, interpolating linearly
/// between order statistics (`h = (n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn quantile(xs: &[f64], q: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(DfaError::Empty("quantile"));
    }
    Ok(quantile_sorted(&sorted_copy(xs), q))
}

pub fn quantiles(xs: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(DfaError::Empty("quantiles"));
    }
    let s = sorted_copy(xs);
    Ok(grid.iter().map(|&q| quantile_sorted(&s, q)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates_between_order_statistics() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&xs, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&xs, 1.0).unwrap(), 4.0);
        assert!((quantile(&xs, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!((quantile(&xs, 0.25).unwrap() - 1.75).abs() < 1e-15);
    }

    #[test]
    fn variance_of_known_sample() {
        assert!((sample_variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(sample_variance(&[7.0]), 0.0);
    }

    #[test]
    fn empty_quantile_is_an_error() {
        assert!(quantile(&[], 0.5).is_err());
    }
}
