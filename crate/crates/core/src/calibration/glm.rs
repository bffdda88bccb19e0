use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::linear::{design, Column};
use super::FitResult;
use crate::error::{DfaError, Result};

pub const GLM_MAX_ITERATIONS: usize = 100;
/// Coefficients beyond this magnitude are reported as separation.
pub const SEPARATION_BOUND: f64 = 30.0;
const REL_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 60;

/// Poisson log-likelihood of counts at linear predictor `eta`.
pub fn poisson_log_likelihood(counts: &[f64], eta: &[f64]) -> f64 {
    counts
        .iter()
        .zip(eta)
        .map(|(&y, &e)| y * e - e.exp() - ln_gamma(y + 1.0))
        .sum()
}

fn linear_predictor(x: &DMatrix<f64>, beta: &DVector<f64>, offset: Option<&[f64]>) -> Vec<f64> {
    let eta = x * beta;
    match offset {
        Some(o) => eta.iter().zip(o).map(|(e, o)| e + o).collect(),
        None => eta.iter().copied().collect(),
    }
}

/// Log-link Poisson regression by iteratively reweighted least squares with
/// step-halving. An intercept is always included.
pub fn fit_poisson_glm(counts: &[f64], covariates: &[Column], offset: Option<&[f64]>) -> Result<FitResult> {
    let n = counts.len();
    if n == 0 {
        return Err(DfaError::Empty("Poisson regression counts"));
    }
    if let Some(&bad) = counts.iter().find(|&&y| !(y >= 0.0) || y.fract() != 0.0) {
        return Err(DfaError::Config(format!("counts must be non-negative integers (got {bad})")));
    }
    if let Some(o) = offset {
        if o.len() != n {
            return Err(DfaError::LengthMismatch {
                what: "offset",
                left: o.len(),
                right: n,
            });
        }
    }
    let (x, names) = design(n, covariates)?;
    let k = x.ncols();

    let mean_y = counts.iter().sum::<f64>() / n as f64;
    let mean_exposure = offset.map_or(1.0, |o| o.iter().map(|v| v.exp()).sum::<f64>() / n as f64);
    let mut beta = DVector::zeros(k);
    if mean_y > 0.0 {
        beta[0] = (mean_y / mean_exposure).ln();
    }
    let mut eta = linear_predictor(&x, &beta, offset);
    let mut ll = poisson_log_likelihood(counts, &eta);
    let mut trace = vec![ll];
    let mut converged = false;

    for _ in 0..GLM_MAX_ITERATIONS {
        // weighted least squares on the working response
        let off = offset.unwrap_or(&[]);
        let mut xtwx = DMatrix::<f64>::zeros(k, k);
        let mut xtwz = DVector::<f64>::zeros(k);
        for i in 0..n {
            let mu = eta[i].exp();
            let z = eta[i] - off.get(i).copied().unwrap_or(0.0) + (counts[i] - mu) / mu;
            let row = x.row(i);
            for a in 0..k {
                let wa = mu * row[a];
                xtwz[a] += wa * z;
                for b in 0..=a {
                    xtwx[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                xtwx[(b, a)] = xtwx[(a, b)];
            }
        }
        let Some(chol) = xtwx.cholesky() else {
            break;
        };
        let target = chol.solve(&xtwz);
        let step = &target - &beta;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &beta + &step * scale;
            let cand_eta = linear_predictor(&x, &cand, offset);
            let cand_ll = poisson_log_likelihood(counts, &cand_eta);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some((cand, cand_eta, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_eta, cand_ll)) = accepted else {
            converged = true;
            break;
        };
        let change = cand_ll - ll;
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;
        trace.push(ll);
        if change <= REL_TOL * ll.abs() {
            converged = true;
            break;
        }
    }

    let separation = beta.iter().any(|b| b.abs() > SEPARATION_BOUND);
    if !converged && !separation {
        return Err(DfaError::NonConvergence {
            iterations: GLM_MAX_ITERATIONS,
            trace,
        });
    }

    let mut info = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let mu = eta[i].exp();
        let row = x.row(i);
        for a in 0..k {
            for b in 0..k {
                info[(a, b)] += mu * row[a] * row[b];
            }
        }
    }
    let se: Vec<f64> = match info.try_inverse() {
        Some(inv) => (0..k).map(|j| inv[(j, j)].max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; k],
    };
    let coefficients = names.iter().cloned().zip(beta.iter().copied()).collect();
    let standard_errors = names.into_iter().zip(se).collect();
    let mut fit = FitResult::new(coefficients, standard_errors, ll, n);
    fit.separation = separation;
    fit.trace = trace;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::poisson_count;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn intercept_only_is_log_mean() {
        let f = fit_poisson_glm(&[1.0, 2.0, 3.0], &[], None).unwrap();
        assert!((f.coefficient("intercept").unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(!f.separation);
    }

    #[test]
    fn all_zero_counts_flag_separation() {
        let f = fit_poisson_glm(&[0.0; 8], &[], None).unwrap();
        assert!(f.separation);
        assert!(f.coefficient("intercept").unwrap() < -SEPARATION_BOUND);
    }

    #[test]
    fn flood_coefficients_recovered() {
        let mut rng = rng_from_seed(12);
        let n = 5000;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..140.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| poisson_count((-3.714 + 0.037 * v).exp(), &mut rng) as f64)
            .collect();
        let f = fit_poisson_glm(&y, &[Column::new("rx5day", x)], None).unwrap();
        for (name, truth) in [("intercept", -3.714), ("rx5day", 0.037)] {
            let est = f.coefficient(name).unwrap();
            assert!((est - truth).abs() < 3.0 * f.standard_error(name).unwrap(), "{name}: {est}");
        }
    }

    #[test]
    fn likelihood_never_decreases() {
        let mut rng = rng_from_seed(4);
        let x: Vec<f64> = (0..300).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| poisson_count((0.2 + 0.9 * v).exp(), &mut rng) as f64).collect();
        let f = fit_poisson_glm(&y, &[Column::new("x", x)], None).unwrap();
        assert!(f.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn offset_shifts_intercept() {
        let y = [2.0, 4.0, 6.0, 8.0];
        let off: Vec<f64> = vec![2f64.ln(); 4];
        let f = fit_poisson_glm(&y, &[], Some(&off)).unwrap();
        assert!((f.coefficient("intercept").unwrap() - (5f64 / 2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn bad_counts_rejected() {
        assert!(fit_poisson_glm(&[1.5, 2.0], &[], None).is_err());
        assert!(fit_poisson_glm(&[-1.0, 2.0], &[], None).is_err());
        assert!(fit_poisson_glm(&[], &[], None).is_err());
        assert!(matches!(
            fit_poisson_glm(&[1.0, 2.0, 3.0], &[Column::new("c", vec![1.0; 3])], None),
            Err(DfaError::RankDeficient(_))
        ));
    }
}
