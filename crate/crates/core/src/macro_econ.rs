//! Climate-adjusted inflation, real and nominal risk-free rates, CPI.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DfaError, Result};

pub const OVERLAY_LAGS: usize = 11;

#[derive(Clone, Debug, PartialEq)]
pub struct InflationParams {
    pub long_run_mean: f64,
    pub ar_coeff: f64,
    pub sigma: f64,
    /// Coefficients on the temperature deviation at lags 1..=11.
    pub overlay_alpha: [f64; OVERLAY_LAGS],
    /// Coefficients on temperature times deviation at lags 1..=11.
    pub overlay_beta: [f64; OVERLAY_LAGS],
    /// Monthly near-surface temperature climatology, January first (°C).
    pub baseline_monthly_temp: [f64; 12],
}

impl InflationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ar_coeff.abs() < 1.0) {
            return Err(DfaError::Config(format!("inflation AR coefficient must satisfy |a| < 1 (got {})", self.ar_coeff)));
        }
        if !(self.sigma >= 0.0) {
            return Err(DfaError::Config(format!("inflation sigma must be non-negative (got {})", self.sigma)));
        }
        Ok(())
    }

    pub fn overlay_is_inert(&self) -> bool {
        self.overlay_alpha.iter().chain(&self.overlay_beta).all(|c| *c == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateParams {
    pub intercept: f64,
    pub growth_sensitivity: f64,
    pub resid_mean: f64,
    pub resid_ar: f64,
    pub resid_sigma: f64,
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.resid_ar.abs() < 1.0) {
            return Err(DfaError::Config(format!("real-rate residual AR coefficient must satisfy |phi| < 1 (got {})", self.resid_ar)));
        }
        if !(self.resid_sigma >= 0.0) {
            return Err(DfaError::Config(format!("real-rate residual sigma must be non-negative (got {})", self.resid_sigma)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InflationStep {
    pub base: f64,
    pub adjusted: f64,
}

/// One AR(1) step of base inflation plus the climate overlay for the year.
pub fn step_inflation(prev: f64, params: &InflationParams, shock: f64, annual_overlay: f64) -> InflationStep {
    let base = params.long_run_mean + params.ar_coeff * (prev - params.long_run_mean) + params.sigma * shock;
    InflationStep {
        base,
        adjusted: base + annual_overlay,
    }
}

/// Climate impact on inflation in one month.
///
/// `trailing[lag]` is the near-surface temperature `lag` months before the
/// current month (`trailing[0]` is the current month, which is not used);
/// `month_index` is the calendar month of the current month (0 = January).
pub fn monthly_inflation_overlay(month_index: usize, trailing: &[f64], params: &InflationParams) -> Result<f64> {
    if trailing.len() < 12 {
        return Err(DfaError::TooShort {
            what: "trailing monthly temperatures",
            needed: 12,
            got: trailing.len(),
        });
    }
    let mut impact = 0.0;
    for lag in 1..=OVERLAY_LAGS {
        let t = trailing[lag];
        let cal_month = (month_index % 12 + 12 - lag) % 12;
        let delta = t - params.baseline_monthly_temp[cal_month];
        impact += params.overlay_alpha[lag - 1] * delta + params.overlay_beta[lag - 1] * t * delta;
    }
    Ok(impact)
}

/// Annual climate overlay for year index `year`: the sum of the twelve
/// monthly impacts. `monthly_temps` runs from January of year index 0, so
/// `year` must be at least 1 for the lags to be available.
pub fn annual_inflation_overlay(year: usize, monthly_temps: &[f64], params: &InflationParams) -> Result<f64> {
    let first = 12 * year;
    if year == 0 || monthly_temps.len() < first + 12 {
        return Err(DfaError::TooShort {
            what: "monthly temperatures for inflation overlay",
            needed: first + 12,
            got: if year == 0 { 0 } else { monthly_temps.len() },
        });
    }
    let mut trailing = [0.0; 12];
    let mut total = 0.0;
    for m in 0..12 {
        let idx = first + m;
        for (lag, slot) in trailing.iter_mut().enumerate() {
            *slot = monthly_temps[idx - lag];
        }
        total += monthly_inflation_overlay(m, &trailing, params)?;
    }
    Ok(total)
}

/// One step of the real rate: AR(1) residual plus growth link.
/// Returns `(real_rate, resid)`.
pub fn step_real_rate(growth: f64, prev_resid: f64, params: &RateParams, shock: f64) -> (f64, f64) {
    let resid = params.resid_mean + params.resid_ar * (prev_resid - params.resid_mean) + params.resid_sigma * shock;
    (params.intercept + params.growth_sensitivity * growth + resid, resid)
}

/// Additive Fisher relation.
pub fn nominal_rate(real_rate: f64, adjusted_inflation: f64) -> f64 {
    real_rate + adjusted_inflation
}

/// Year-by-year macro-economic path. Index 0 holds the initial state at the
/// projection start year (CPI = 1).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EconPath {
    pub base_inflation: Vec<f64>,
    pub climate_inflation_impact: Vec<f64>,
    pub adjusted_inflation: Vec<f64>,
    pub real_rate: Vec<f64>,
    pub nominal_rate: Vec<f64>,
    pub cpi_index: Vec<f64>,
}

pub struct MacroInputs<'a> {
    /// Potential growth rate per year index (index 0 unused).
    pub potential_growth: &'a [f64],
    /// Monthly near-surface temperatures from January of year index 0, if the
    /// overlay is active.
    pub monthly_temps: Option<&'a [f64]>,
    pub initial_inflation: f64,
    pub initial_resid: f64,
}

impl EconPath {
    pub fn years(&self) -> usize {
        self.cpi_index.len().saturating_sub(1)
    }

    /// Simulates years 1..=`years` with independent standard-normal shocks
    /// from the two generators.
    pub fn simulate<R1: Rng, R2: Rng>(
        years: usize,
        infl: &InflationParams,
        rates: &RateParams,
        inputs: &MacroInputs<'_>,
        infl_rng: &mut R1,
        rate_rng: &mut R2,
    ) -> Result<EconPath> {
        if inputs.potential_growth.len() < years + 1 {
            return Err(DfaError::TooShort {
                what: "potential growth series",
                needed: years + 1,
                got: inputs.potential_growth.len(),
            });
        }
        let mut path = EconPath::with_capacity(years + 1);
        path.base_inflation.push(inputs.initial_inflation);
        path.climate_inflation_impact.push(0.0);
        path.adjusted_inflation.push(inputs.initial_inflation);
        path.real_rate.push(f64::NAN);
        path.nominal_rate.push(f64::NAN);
        path.cpi_index.push(1.0);

        let mut prev_base = inputs.initial_inflation;
        let mut prev_resid = inputs.initial_resid;
        let mut cpi = 1.0;
        for t in 1..=years {
            let overlay = match inputs.monthly_temps {
                Some(temps) => annual_inflation_overlay(t, temps, infl)?,
                None => 0.0,
            };
            let shock: f64 = infl_rng.sample(StandardNormal);
            let step = step_inflation(prev_base, infl, shock, overlay);
            let rshock: f64 = rate_rng.sample(StandardNormal);
            let (real, resid) = step_real_rate(inputs.potential_growth[t], prev_resid, rates, rshock);
            cpi *= 1.0 + step.adjusted;

            path.base_inflation.push(step.base);
            path.climate_inflation_impact.push(overlay);
            path.adjusted_inflation.push(step.adjusted);
            path.real_rate.push(real);
            path.nominal_rate.push(nominal_rate(real, step.adjusted));
            path.cpi_index.push(cpi);
            prev_base = step.base;
            prev_resid = resid;
        }
        Ok(path)
    }

    fn with_capacity(n: usize) -> Self {
        EconPath {
            base_inflation: Vec::with_capacity(n),
            climate_inflation_impact: Vec::with_capacity(n),
            adjusted_inflation: Vec::with_capacity(n),
            real_rate: Vec::with_capacity(n),
            nominal_rate: Vec::with_capacity(n),
            cpi_index: Vec::with_capacity(n),
        }
    }
}
