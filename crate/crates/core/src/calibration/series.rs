use super::FitResult;
use crate::error::{DfaError, Result};
use crate::stats::{mean, quantile_sorted, sample_variance, sorted_copy};

/// Percentiles 1 to 99.
pub fn default_quantile_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Least-squares affine map from backcast quantiles to historical quantiles.
/// Returns `(intercept, slope)`.
pub fn fit_affine_quantile_map(historical: &[f64], backcast: &[f64], quantile_grid: &[f64]) -> Result<(f64, f64)> {
    if historical.is_empty() || backcast.is_empty() {
        return Err(DfaError::Empty("quantile map series"));
    }
    if quantile_grid.len() < 2 {
        return Err(DfaError::TooShort {
            what: "quantile grid",
            needed: 2,
            got: quantile_grid.len(),
        });
    }
    if let Some(q) = quantile_grid.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(DfaError::Config(format!("quantile grid values must lie in (0, 1) (got {q})")));
    }
    let hs = sorted_copy(historical);
    let bs = sorted_copy(backcast);
    let hq: Vec<f64> = quantile_grid.iter().map(|&q| quantile_sorted(&hs, q)).collect();
    let bq: Vec<f64> = quantile_grid.iter().map(|&q| quantile_sorted(&bs, q)).collect();
    let mb = mean(&bq);
    let mh = mean(&hq);
    let sxx: f64 = bq.iter().map(|b| (b - mb) * (b - mb)).sum();
    if !(sxx > 0.0) {
        return Err(DfaError::RankDeficient("backcast quantiles are all equal".into()));
    }
    let sxy: f64 = bq.iter().zip(&hq).map(|(b, h)| (b - mb) * (h - mh)).sum();
    let slope = sxy / sxx;
    Ok((mh - slope * mb, slope))
}

/// Maximum-likelihood standard deviation of zero-mean residuals.
pub fn fit_residual_sigma(historical: &[f64], corrected_backcast: &[f64]) -> Result<f64> {
    if historical.len() != corrected_backcast.len() {
        return Err(DfaError::LengthMismatch {
            what: "residual series",
            left: historical.len(),
            right: corrected_backcast.len(),
        });
    }
    if historical.len() < 2 {
        return Err(DfaError::TooShort {
            what: "residual series",
            needed: 2,
            got: historical.len(),
        });
    }
    let ss: f64 = historical
        .iter()
        .zip(corrected_backcast)
        .map(|(h, c)| (h - c) * (h - c))
        .sum();
    Ok((ss / historical.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ar1Fit {
    pub mean: f64,
    pub ar_coeff: f64,
    pub sigma: f64,
    pub non_stationary: bool,
    /// Coefficients `mean`, `ar_coeff`, `sigma` with standard errors.
    pub fit: FitResult,
}

/// Conditional least squares fit of `x_t = c + a x_{t-1} + e_t`.
pub fn fit_ar1(series: &[f64]) -> Result<Ar1Fit> {
    let n = series.len();
    if n < 3 {
        return Err(DfaError::TooShort {
            what: "AR(1) series",
            needed: 3,
            got: n,
        });
    }
    if sample_variance(series) == 0.0 {
        return Err(DfaError::ZeroVariance("AR(1) series"));
    }
    let prev = &series[..n - 1];
    let next = &series[1..];
    let m = (n - 1) as f64;
    let mp = mean(prev);
    let mn = mean(next);
    let sxx: f64 = prev.iter().map(|x| (x - mp) * (x - mp)).sum();
    if !(sxx > 0.0) {
        return Err(DfaError::ZeroVariance("lagged AR(1) series"));
    }
    let sxy: f64 = prev.iter().zip(next).map(|(x, y)| (x - mp) * (y - mn)).sum();
    let a = sxy / sxx;
    let c = mn - a * mp;
    let rss: f64 = prev.iter().zip(next).map(|(x, y)| (y - c - a * x).powi(2)).sum();
    let sigma = (rss / m).sqrt();

    // classical covariance of (c, a), then the delta method for c / (1 - a)
    let s2 = if m > 2.0 { rss / (m - 2.0) } else { rss / m };
    let var_a = s2 / sxx;
    let var_c = s2 * (1.0 / m + mp * mp / sxx);
    let cov_ca = -s2 * mp / sxx;
    let mu = c / (1.0 - a);
    let g_c = 1.0 / (1.0 - a);
    let g_a = c / (1.0 - a).powi(2);
    let var_mu = g_c * g_c * var_c + 2.0 * g_c * g_a * cov_ca + g_a * g_a * var_a;

    let log_likelihood = if sigma > 0.0 {
        -0.5 * m * ((2.0 * std::f64::consts::PI * sigma * sigma).ln() + 1.0)
    } else {
        f64::INFINITY
    };
    let fit = FitResult::new(
        vec![("mean".into(), mu), ("ar_coeff".into(), a), ("sigma".into(), sigma)],
        vec![
            ("mean".into(), var_mu.max(0.0).sqrt()),
            ("ar_coeff".into(), var_a.max(0.0).sqrt()),
            ("sigma".into(), sigma / (2.0 * m).sqrt()),
        ],
        log_likelihood,
        n - 1,
    );
    Ok(Ar1Fit {
        mean: mu,
        ar_coeff: a,
        sigma,
        non_stationary: a.abs() >= 1.0,
        fit,
    })
}

/// Method-of-moments dispersion for a Tweedie variable with known mean and
/// power.
pub fn fit_tweedie_dispersion(losses: &[f64], mu: f64, power: f64) -> Result<f64> {
    if losses.is_empty() {
        return Err(DfaError::Empty("Tweedie losses"));
    }
    if let Some(&bad) = losses.iter().find(|v| !(**v >= 0.0)) {
        return Err(DfaError::Config(format!("Tweedie losses must be non-negative (got {bad})")));
    }
    if !(mu > 0.0) {
        return Err(DfaError::NonPositive { what: "Tweedie mean", value: mu });
    }
    if !(power > 1.0 && power < 2.0) {
        return Err(DfaError::Config(format!("Tweedie power must lie in (1, 2) (got {power})")));
    }
    Ok(sample_variance(losses) / mu.powf(power))
}
