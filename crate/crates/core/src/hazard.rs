//! Weather-dependent collective risk model.
//!
//! Each hazard has a Poisson event count whose log-rate is linear in climate
//! covariates, and LogNormal event severities whose log-location is linear in
//! (possibly other) covariates. Losses are simulated in normalised,
//! reference-year terms and mapped to nominal terms with CPI and real-GDP
//! ratios.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::climate::{ClimateTrajectory, ClimateVar, Resolution};
use crate::error::{DfaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardId {
    Flood,
    Bushfire,
    TropicalCyclone,
    Storm,
    EastCoastLow,
    Hailstorm,
}

impl HazardId {
    pub fn name(self) -> &'static str {
        match self {
            HazardId::Flood => "flood",
            HazardId::Bushfire => "bushfire",
            HazardId::TropicalCyclone => "tropical_cyclone",
            HazardId::Storm => "storm",
            HazardId::EastCoastLow => "east_coast_low",
            HazardId::Hailstorm => "hailstorm",
        }
    }
}

impl fmt::Display for HazardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HazardModel {
    pub hazard_id: HazardId,
    pub resolution: Resolution,
    pub freq_intercept: f64,
    pub freq_coeffs: Vec<(ClimateVar, f64)>,
    pub sev_intercept: f64,
    /// Empty for stationary severity.
    pub sev_coeffs: Vec<(ClimateVar, f64)>,
    /// Log-scale dispersion of event severity.
    pub sev_sigma: f64,
}

impl HazardModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sev_sigma > 0.0) || !self.sev_sigma.is_finite() {
            return Err(DfaError::Config(format!(
                "hazard `{}`: sev_sigma must be positive (got {})",
                self.hazard_id, self.sev_sigma
            )));
        }
        let finite = self.freq_intercept.is_finite()
            && self.sev_intercept.is_finite()
            && self.freq_coeffs.iter().chain(&self.sev_coeffs).all(|(_, c)| c.is_finite());
        if !finite {
            return Err(DfaError::Config(format!("hazard `{}`: non-finite coefficient", self.hazard_id)));
        }
        Ok(())
    }

    pub fn is_stationary_severity(&self) -> bool {
        self.sev_coeffs.is_empty()
    }

    /// Every covariate the model reads.
    pub fn covariates(&self) -> impl Iterator<Item = ClimateVar> + '_ {
        self.freq_coeffs.iter().chain(&self.sev_coeffs).map(|(v, _)| *v)
    }
}

/// Source of covariate values for one period.
pub trait Covariates {
    fn get(&self, var: ClimateVar) -> Option<f64>;
}

impl Covariates for BTreeMap<ClimateVar, f64> {
    fn get(&self, var: ClimateVar) -> Option<f64> {
        BTreeMap::get(self, &var).copied()
    }
}

/// Covariates of one period of a trajectory.
pub struct TrajectoryPeriod<'a> {
    pub trajectory: &'a ClimateTrajectory,
    pub year: usize,
    pub month: Option<usize>,
}

impl Covariates for TrajectoryPeriod<'_> {
    fn get(&self, var: ClimateVar) -> Option<f64> {
        self.trajectory.value(var, self.year, self.month)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventParams {
    /// Expected number of events per model period.
    pub rate: f64,
    /// Location of log severity.
    pub log_location: f64,
}

fn linear_predictor(model: &HazardModel, intercept: f64, coeffs: &[(ClimateVar, f64)], cov: &dyn Covariates) -> Result<f64> {
    let mut eta = intercept;
    for &(var, beta) in coeffs {
        let x = cov
            .get(var)
            .filter(|x| x.is_finite())
            .ok_or_else(|| DfaError::MissingCovariate {
                hazard: model.hazard_id.to_string(),
                covariate: var.to_string(),
            })?;
        eta += beta * x;
    }
    Ok(eta)
}

pub fn hazard_event_params(model: &HazardModel, covariates: &dyn Covariates) -> Result<EventParams> {
    let rate = linear_predictor(model, model.freq_intercept, &model.freq_coeffs, covariates)?.exp();
    let log_location = linear_predictor(model, model.sev_intercept, &model.sev_coeffs, covariates)?;
    Ok(EventParams { rate, log_location })
}

/// Event parameters for each model period of year index `year`
/// (one entry for annual models, twelve for monthly).
pub fn period_params(model: &HazardModel, trajectory: &ClimateTrajectory, year: usize) -> Result<Vec<EventParams>> {
    match model.resolution {
        Resolution::Annual => Ok(vec![hazard_event_params(
            model,
            &TrajectoryPeriod {
                trajectory,
                year,
                month: None,
            },
        )?]),
        Resolution::Monthly => (0..12)
            .map(|m| {
                hazard_event_params(
                    model,
                    &TrajectoryPeriod {
                        trajectory,
                        year,
                        month: Some(m),
                    },
                )
            })
            .collect(),
    }
}

/// Analytic mean and variance of the annual aggregate normalised loss for
/// one hazard, given its per-period parameters.
pub fn aggregate_moments(periods: &[EventParams], sev_sigma: f64) -> (f64, f64) {
    let s2 = sev_sigma * sev_sigma;
    periods.iter().fold((0.0, 0.0), |(m, v), p| {
        (
            m + p.rate * (p.log_location + 0.5 * s2).exp(),
            v + p.rate * (2.0 * p.log_location + 2.0 * s2).exp(),
        )
    })
}

pub fn poisson_count<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if !(rate > 0.0) {
        return 0;
    }
    match Poisson::new(rate) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Draws event losses for a set of periods with known parameters.
pub fn sample_period_losses<R: Rng + ?Sized>(periods: &[EventParams], sev_sigma: f64, rng: &mut R, out: &mut Vec<f64>) {
    for p in periods {
        let n = poisson_count(p.rate, rng);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            out.push((p.log_location + sev_sigma * z).exp());
        }
    }
}

/// Normalised event losses of one hazard in year index `year`.
pub fn simulate_annual_hazard_losses<R: Rng + ?Sized>(
    model: &HazardModel,
    trajectory: &ClimateTrajectory,
    year: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let periods = period_params(model, trajectory, year)?;
    let mut out = Vec::new();
    sample_period_losses(&periods, model.sev_sigma, rng, &mut out);
    Ok(out)
}

/// Maps a normalised (reference-year) loss to nominal terms.
pub fn denormalize_loss(normalised: f64, cpi_ratio: f64, gdp_ratio: f64) -> Result<f64> {
    check_ratios(cpi_ratio, gdp_ratio)?;
    Ok(normalised * cpi_ratio * gdp_ratio)
}

pub fn normalize_loss(nominal: f64, cpi_ratio: f64, gdp_ratio: f64) -> Result<f64> {
    check_ratios(cpi_ratio, gdp_ratio)?;
    Ok(nominal / (cpi_ratio * gdp_ratio))
}

fn check_ratios(cpi_ratio: f64, gdp_ratio: f64) -> Result<()> {
    if !(cpi_ratio > 0.0) {
        return Err(DfaError::NonPositive {
            what: "CPI ratio",
            value: cpi_ratio,
        });
    }
    if !(gdp_ratio > 0.0) {
        return Err(DfaError::NonPositive {
            what: "real GDP ratio",
            value: gdp_ratio,
        });
    }
    Ok(())
}

/// Catastrophe losses of the whole market in one year.
#[derive(Clone, Debug, Default)]
pub struct AnnualCatLosses {
    pub year: i32,
    pub per_hazard_normalised: BTreeMap<HazardId, Vec<f64>>,
    pub market_total_nominal: f64,
}

impl AnnualCatLosses {
    pub fn new(year: i32, per_hazard_normalised: BTreeMap<HazardId, Vec<f64>>, cpi_ratio: f64, gdp_ratio: f64) -> Result<Self> {
        let mut total = 0.0;
        for losses in per_hazard_normalised.values() {
            for &x in losses {
                total += denormalize_loss(x, cpi_ratio, gdp_ratio)?;
            }
        }
        Ok(AnnualCatLosses {
            year,
            per_hazard_normalised,
            market_total_nominal: total,
        })
    }

    pub fn normalised_total(&self) -> f64 {
        self.per_hazard_normalised.values().flatten().sum()
    }
}
