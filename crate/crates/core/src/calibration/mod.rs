//! Estimators for every statistical model the engine consumes, with
//! likelihood-based model comparison.

mod glm;
mod linear;
mod series;

pub use glm::{fit_poisson_glm, poisson_log_likelihood, GLM_MAX_ITERATIONS, SEPARATION_BOUND};
pub use linear::{fit_lognormal_location, fit_ols, Column};
pub use series::{
    default_quantile_grid, fit_affine_quantile_map, fit_ar1, fit_residual_sigma, fit_tweedie_dispersion, Ar1Fit,
};

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub coefficients: Vec<(String, f64)>,
    pub standard_errors: Vec<(String, f64)>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    /// A coefficient ran past the separation bound; the MLE is at infinity.
    pub separation: bool,
    /// Log-likelihood after each iteration, for iterative fitters.
    pub trace: Vec<f64>,
}

impl FitResult {
    /// Builds a result and derives the information criteria, counting every
    /// entry of `coefficients` as a parameter.
    pub fn new(coefficients: Vec<(String, f64)>, standard_errors: Vec<(String, f64)>, log_likelihood: f64, n_obs: usize) -> Self {
        let k = coefficients.len() as f64;
        FitResult {
            aic: 2.0 * k - 2.0 * log_likelihood,
            bic: k * (n_obs as f64).ln() - 2.0 * log_likelihood,
            coefficients,
            standard_errors,
            log_likelihood,
            n_obs,
            separation: false,
            trace: Vec::new(),
        }
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficients.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn standard_error(&self, name: &str) -> Option<f64> {
        self.standard_errors.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}
