use nalgebra::{DMatrix, DVector};

use super::FitResult;
use crate::error::{DfaError, Result};

/// A named regressor.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            values,
        }
    }
}

/// Design matrix with a leading intercept column, and the coefficient names.
pub(super) fn design(n: usize, covariates: &[Column]) -> Result<(DMatrix<f64>, Vec<String>)> {
    let k = covariates.len() + 1;
    let mut names = Vec::with_capacity(k);
    names.push("intercept".to_string());
    for c in covariates {
        if c.values.len() != n {
            return Err(DfaError::LengthMismatch {
                what: "covariate column",
                left: c.values.len(),
                right: n,
            });
        }
        if c.values.iter().any(|v| !v.is_finite()) {
            return Err(DfaError::Config(format!("covariate `{}` has non-finite values", c.name)));
        }
        names.push(c.name.clone());
    }
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { covariates[j - 1].values[i] });
    check_rank(&x)?;
    Ok((x, names))
}

/// Rejects designs whose columns are linearly dependent.
pub(super) fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    let k = x.ncols();
    if x.nrows() < k {
        return Err(DfaError::RankDeficient(format!("{} observations for {} coefficients", x.nrows(), k)));
    }
    // scale columns so the tolerance does not depend on units
    let mut scaled = x.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= max * 1e-10 {
        return Err(DfaError::RankDeficient(format!(
            "design matrix of {} columns is not of full column rank",
            k
        )));
    }
    Ok(())
}

/// Least squares with classical standard errors and a Gaussian likelihood.
/// Coefficients are the intercept, one slope per covariate, and `sigma`
/// (maximum-likelihood residual standard deviation).
pub fn fit_ols(response: &[f64], covariates: &[Column]) -> Result<FitResult> {
    let n = response.len();
    if response.iter().any(|v| !v.is_finite()) {
        return Err(DfaError::Config("response has non-finite values".into()));
    }
    let (x, names) = design(n, covariates)?;
    let k = x.ncols();
    if n <= k {
        return Err(DfaError::TooShort {
            what: "observations for least squares",
            needed: k + 1,
            got: n,
        });
    }
    let y = DVector::from_column_slice(response);
    let xtx = x.transpose() * &x;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| DfaError::RankDeficient("normal equations are not positive definite".into()))?;
    let beta = chol.solve(&(x.transpose() * &y));
    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let sigma2 = rss / n as f64;
    let s2 = rss / (n - k) as f64;
    let inv = chol.inverse();
    let log_likelihood = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);

    let sigma = sigma2.sqrt();
    let mut coefficients: Vec<(String, f64)> = names.iter().cloned().zip(beta.iter().copied()).collect();
    let mut standard_errors: Vec<(String, f64)> = names
        .iter()
        .cloned()
        .enumerate()
        .map(|(j, name)| (name, (s2 * inv[(j, j)]).max(0.0).sqrt()))
        .collect();
    coefficients.push(("sigma".into(), sigma));
    standard_errors.push(("sigma".into(), sigma / (2.0 * n as f64).sqrt()));
    Ok(FitResult::new(coefficients, standard_errors, log_likelihood, n))
}

/// Regression of log losses on covariates; `sigma` is the severity
/// dispersion on the log scale.
pub fn fit_lognormal_location(losses: &[f64], covariates: &[Column]) -> Result<FitResult> {
    if let Some(&bad) = losses.iter().find(|v| !(**v > 0.0)) {
        return Err(DfaError::NonPositive { what: "loss", value: bad });
    }
    let logs: Vec<f64> = losses.iter().map(|v| v.ln()).collect();
    let mut fit = fit_ols(&logs, covariates)?;
    // likelihood of the losses themselves: subtract the log Jacobian
    let jac: f64 = logs.iter().sum();
    fit = FitResult::new(fit.coefficients, fit.standard_errors, fit.log_likelihood - jac, fit.n_obs);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 2.0 * v).collect();
        let f = fit_ols(&y, &[Column::new("x", x)]).unwrap();
        assert!((f.coefficient("intercept").unwrap() - 1.0).abs() < 1e-10);
        assert!((f.coefficient("x").unwrap() - 2.0).abs() < 1e-10);
        assert!(f.coefficient("sigma").unwrap() < 1e-10);
    }

    #[test]
    fn noisy_slope_recovered() {
        let mut rng = rng_from_seed(8);
        let n = 5000;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 1.3 * v + 0.7 * rng.sample::<f64, _>(StandardNormal)).collect();
        let f = fit_ols(&y, &[Column::new("x", x)]).unwrap();
        let se = f.standard_error("x").unwrap();
        assert!((f.coefficient("x").unwrap() + 1.3).abs() < 3.0 * se);
        assert!((f.coefficient("sigma").unwrap() - 0.7).abs() < 3.0 * f.standard_error("sigma").unwrap());
        assert!((f.aic - (2.0 * 3.0 - 2.0 * f.log_likelihood)).abs() < 1e-9);
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = x.clone();
        let r = fit_ols(&y, &[Column::new("a", x.clone()), Column::new("b", x)]);
        assert!(matches!(r, Err(DfaError::RankDeficient(_))));
    }

    #[test]
    fn too_few_observations() {
        assert!(fit_ols(&[1.0, 2.0], &[Column::new("x", vec![0.0, 1.0])]).is_err());
    }

    #[test]
    fn lognormal_exact_recovery() {
        let x: Vec<f64> = (0..40).map(|i| 10.0 + 2.0 * i as f64).collect();
        let losses: Vec<f64> = x.iter().map(|v| (1.0 + 0.035 * v).exp()).collect();
        let f = fit_lognormal_location(&losses, &[Column::new("rx5day", x)]).unwrap();
        assert!((f.coefficient("intercept").unwrap() - 1.0).abs() < 1e-10);
        assert!((f.coefficient("rx5day").unwrap() - 0.035).abs() < 1e-10);
        assert!(f.coefficient("sigma").unwrap() < 1e-10);
    }

    #[test]
    fn lognormal_errors() {
        let x = Column::new("c", vec![3.0; 5]);
        assert!(matches!(
            fit_lognormal_location(&[1.0, 2.0, 3.0, 4.0, 5.0], &[x]),
            Err(DfaError::RankDeficient(_))
        ));
        let x = Column::new("c", vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(
            fit_lognormal_location(&[1.0, 0.0, 3.0, 4.0, 5.0], &[x]),
            Err(DfaError::NonPositive { .. })
        ));
    }

    #[test]
    fn lognormal_round_trip() {
        let mut rng = rng_from_seed(31);
        let n = 4000;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..120.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (3.08 + 0.035 * v + 1.5 * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        let f = fit_lognormal_location(&y, &[Column::new("rx5day", x)]).unwrap();
        for (name, truth) in [("intercept", 3.08), ("rx5day", 0.035), ("sigma", 1.5)] {
            let est = f.coefficient(name).unwrap();
            assert!((est - truth).abs() < 3.0 * f.standard_error(name).unwrap(), "{name}: {est}");
        }
    }
}
