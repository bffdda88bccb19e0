//! Run configuration as read from TOML, and its validated domain form.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assets::{EquityParams, PortfolioParams};
use crate::climate::{BiasCorrection, ClimateVar, Resolution};
use crate::error::{DfaError, Result};
use crate::hazard::{HazardId, HazardModel};
use crate::liability::{validate_market, InsurerSpec, NonCatParams, ReinsuranceMarketParams};
use crate::macro_econ::{InflationParams, RateParams, OVERLAY_LAGS};

/// Configuration shipped with the crate: the default market, parameter
/// blocks, climate ensemble and four socio-economic scenarios.
pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub market: MarketSection,
    pub reinsurer: ReinsurerSection,
    pub inflation: InflationSection,
    pub real_rate: RealRateSection,
    pub equity: EquitySection,
    pub portfolio: PortfolioSection,
    pub noncat: NonCatSection,
    pub hazards: Vec<HazardSection>,
    pub climate: ClimateSection,
    pub scenarios: Vec<ScenarioSection>,
    #[serde(default)]
    pub calibration: Vec<CalibrationJob>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PremiumTiming {
    /// Price each year on that year's simulated covariates.
    #[default]
    Current,
    /// Price each year on the previous year's covariates.
    Prior,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub start_year: i32,
    pub end_year: i32,
    pub n_paths: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub inner_samples: usize,
    pub n_calib: usize,
    pub target_capital_ratio: f64,
    pub uninsured_ratio: f64,
    #[serde(default)]
    pub premium_timing: PremiumTiming,
    #[serde(default = "default_horizons")]
    pub cagr_horizons: Vec<usize>,
    #[serde(default = "yes")]
    pub write_paths: bool,
    #[serde(default = "yes")]
    pub noncat_enabled: bool,
    /// Base inflation in the start year; the long-run mean when absent.
    #[serde(default)]
    pub initial_inflation: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_horizons() -> Vec<usize> {
    vec![5, 10, 20, 30]
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub risk_loading: f64,
    pub insurers: Vec<InsurerSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InsurerSection {
    pub id: String,
    pub share: f64,
    pub excess: f64,
    pub limit: f64,
    /// Skips capital calibration for this insurer.
    #[serde(default)]
    pub initial_capital: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReinsurerSection {
    pub reference_solvency: f64,
    pub sensitivity: f64,
    pub initial_capital: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InflationSection {
    pub long_run_mean: f64,
    pub ar_coeff: f64,
    pub sigma: f64,
    #[serde(default)]
    pub overlay_alpha: Vec<f64>,
    #[serde(default)]
    pub overlay_beta: Vec<f64>,
    #[serde(default)]
    pub baseline_monthly_temp: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RealRateSection {
    pub intercept: f64,
    pub growth_sensitivity: f64,
    pub resid_mean: f64,
    pub resid_ar: f64,
    pub resid_sigma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EquitySection {
    pub op_intercept: f64,
    pub op_sensitivity: f64,
    pub op_sigma: f64,
    pub x_intercept: f64,
    pub x_sensitivity: f64,
    pub x_sigma: f64,
    pub brown_sensitivity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PortfolioSection {
    pub risk_free_weight: f64,
    pub brown_weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NonCatSection {
    pub mu: f64,
    pub dispersion: f64,
    #[serde(default = "default_power")]
    pub power: f64,
    pub exposure_intercept: f64,
    pub exposure_slope: f64,
}

fn default_power() -> f64 {
    1.5
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HazardSection {
    pub id: HazardId,
    pub resolution: Resolution,
    #[serde(default = "yes")]
    pub enabled: bool,
    pub freq_intercept: f64,
    #[serde(default)]
    pub freq_coeffs: BTreeMap<String, f64>,
    pub sev_intercept: f64,
    #[serde(default)]
    pub sev_coeffs: BTreeMap<String, f64>,
    pub sev_sigma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClimateSection {
    #[serde(default)]
    pub fallback_member: Option<String>,
    /// Climatology per variable: one value for annual variables, twelve for
    /// monthly ones. Used to build synthetic forecasts.
    #[serde(default)]
    pub baseline: BTreeMap<String, Vec<f64>>,
    pub members: Vec<MemberSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MemberSection {
    pub id: String,
    /// Multiplies scenario climate trends in synthetic forecasts.
    #[serde(default = "one")]
    pub trend_scale: f64,
    pub bias: BTreeMap<String, BiasCorrection>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub id: String,
    #[serde(default)]
    pub gdp: Vec<(i32, f64)>,
    #[serde(default)]
    pub gdp_file: Option<PathBuf>,
    #[serde(default)]
    pub potential_growth: Vec<(i32, f64)>,
    #[serde(default)]
    pub potential_growth_file: Option<PathBuf>,
    #[serde(default)]
    pub population: Vec<(i32, f64)>,
    #[serde(default)]
    pub population_file: Option<PathBuf>,
    #[serde(default)]
    pub brown_production: Vec<(i32, f64)>,
    #[serde(default)]
    pub brown_production_file: Option<PathBuf>,
    /// Yearly drift of each variable added to the climatology in synthetic
    /// forecasts.
    #[serde(default)]
    pub climate_trend: BTreeMap<String, f64>,
    /// Directory with `<member>/<variable>.csv` forecasts; replaces the
    /// synthetic forecasts when present.
    #[serde(default)]
    pub climate_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationKind {
    QuantileMap,
    PoissonGlm,
    LognormalLocation,
    Ar1,
    Ols,
    TweedieDispersion,
}

/// One fit run by the `calibrate` command. File paths are relative to the
/// data directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CalibrationJob {
    pub model: String,
    pub kind: CalibrationKind,
    pub file: PathBuf,
    /// Response column; defaults to `value` (or `count` for Poisson fits).
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub offset: Option<String>,
    /// Second file (backcast) for quantile maps.
    #[serde(default)]
    pub backcast_file: Option<PathBuf>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub power: Option<f64>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<RunConfig> {
        toml::from_str(text).map_err(|source| DfaError::Toml {
            path: origin.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| DfaError::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn default_config() -> RunConfig {
        Self::from_toml_str(DEFAULT_CONFIG, Path::new("default.toml")).expect("shipped configuration parses")
    }

    pub fn horizon_years(&self) -> usize {
        (self.run.end_year - self.run.start_year).max(0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if r.end_year <= r.start_year {
            return Err(cfg(format!("end_year {} must be after start_year {}", r.end_year, r.start_year)));
        }
        if r.n_paths == 0 {
            return Err(cfg("n_paths must be at least 1"));
        }
        if r.inner_samples < 1000 {
            return Err(cfg(format!("inner_samples must be at least 1000 (got {})", r.inner_samples)));
        }
        if !(r.target_capital_ratio >= 0.0) || !(r.uninsured_ratio >= 0.0) {
            return Err(cfg("target_capital_ratio and uninsured_ratio must be non-negative"));
        }
        let needs_calibration = self.market.insurers.iter().any(|i| i.initial_capital.is_none());
        if needs_calibration && r.n_calib < crate::surplus::MIN_CALIBRATION_DRAWS {
            return Err(cfg(format!(
                "n_calib must be at least {} (got {})",
                crate::surplus::MIN_CALIBRATION_DRAWS,
                r.n_calib
            )));
        }
        if !(self.market.risk_loading >= 0.0) {
            return Err(cfg("risk_loading must be non-negative"));
        }
        validate_market(&self.insurers())?;
        self.reinsurance().validate()?;
        self.inflation_params()?.validate()?;
        self.rate_params().validate()?;
        self.equity_params().validate()?;
        self.portfolio_params().validate()?;
        if r.noncat_enabled {
            self.noncat_params().validate()?;
        }
        let models = self.hazard_models()?;
        for m in &models {
            m.validate()?;
        }
        let mut seen = Vec::new();
        for h in &self.hazards {
            if seen.contains(&h.id) {
                return Err(cfg(format!("hazard `{}` configured twice", h.id)));
            }
            seen.push(h.id);
        }
        if self.scenarios.is_empty() {
            return Err(cfg("no scenarios configured"));
        }
        let mut ids = Vec::new();
        for s in &self.scenarios {
            if ids.contains(&&s.id) {
                return Err(cfg(format!("scenario `{}` configured twice", s.id)));
            }
            ids.push(&s.id);
        }
        if self.climate.members.is_empty() {
            return Err(cfg("climate ensemble has no members"));
        }
        for m in &self.climate.members {
            for name in m.bias.keys() {
                parse_var(name)?;
            }
        }
        for (name, values) in &self.climate.baseline {
            let var = parse_var(name)?;
            let want = var.resolution().periods_per_year();
            if values.len() != want {
                return Err(cfg(format!("climate baseline `{name}` needs {want} values (got {})", values.len())));
            }
        }
        Ok(())
    }

    pub fn insurers(&self) -> Vec<InsurerSpec> {
        self.market
            .insurers
            .iter()
            .map(|i| InsurerSpec {
                insurer_id: i.id.clone(),
                market_share: i.share,
                xol_excess: i.excess,
                xol_limit: i.limit,
            })
            .collect()
    }

    pub fn reinsurance(&self) -> ReinsuranceMarketParams {
        ReinsuranceMarketParams {
            risk_loading: self.market.risk_loading,
            sensitivity: self.reinsurer.sensitivity,
            reference_solvency: self.reinsurer.reference_solvency,
            initial_reinsurer_capital: self.reinsurer.initial_capital,
        }
    }

    pub fn inflation_params(&self) -> Result<InflationParams> {
        let s = &self.inflation;
        Ok(InflationParams {
            long_run_mean: s.long_run_mean,
            ar_coeff: s.ar_coeff,
            sigma: s.sigma,
            overlay_alpha: fixed_or_zero(&s.overlay_alpha, "overlay_alpha")?,
            overlay_beta: fixed_or_zero(&s.overlay_beta, "overlay_beta")?,
            baseline_monthly_temp: fixed_or_zero(&s.baseline_monthly_temp, "baseline_monthly_temp")?,
        })
    }

    pub fn rate_params(&self) -> RateParams {
        let s = &self.real_rate;
        RateParams {
            intercept: s.intercept,
            growth_sensitivity: s.growth_sensitivity,
            resid_mean: s.resid_mean,
            resid_ar: s.resid_ar,
            resid_sigma: s.resid_sigma,
        }
    }

    pub fn equity_params(&self) -> EquityParams {
        let s = &self.equity;
        EquityParams {
            op_intercept: s.op_intercept,
            op_sensitivity: s.op_sensitivity,
            op_sigma: s.op_sigma,
            x_intercept: s.x_intercept,
            x_sensitivity: s.x_sensitivity,
            x_sigma: s.x_sigma,
            brown_sensitivity: s.brown_sensitivity,
        }
    }

    pub fn portfolio_params(&self) -> PortfolioParams {
        PortfolioParams {
            risk_free_weight: self.portfolio.risk_free_weight,
            brown_weight: self.portfolio.brown_weight,
        }
    }

    pub fn noncat_params(&self) -> NonCatParams {
        let s = &self.noncat;
        NonCatParams {
            mu: s.mu,
            dispersion: s.dispersion,
            power: s.power,
            exposure_intercept: s.exposure_intercept,
            exposure_slope: s.exposure_slope,
        }
    }

    /// Enabled hazard models in configuration order.
    pub fn hazard_models(&self) -> Result<Vec<HazardModel>> {
        self.hazards
            .iter()
            .filter(|h| h.enabled)
            .map(|h| {
                let coeffs = |map: &BTreeMap<String, f64>| -> Result<Vec<(ClimateVar, f64)>> {
                    map.iter().map(|(k, v)| Ok((parse_var(k)?, *v))).collect()
                };
                Ok(HazardModel {
                    hazard_id: h.id,
                    resolution: h.resolution,
                    freq_intercept: h.freq_intercept,
                    freq_coeffs: coeffs(&h.freq_coeffs)?,
                    sev_intercept: h.sev_intercept,
                    sev_coeffs: coeffs(&h.sev_coeffs)?,
                    sev_sigma: h.sev_sigma,
                })
            })
            .collect()
    }

    /// Climate variables the enabled hazards and the inflation overlay read.
    pub fn required_climate_vars(&self) -> Result<Vec<ClimateVar>> {
        let mut vars: Vec<ClimateVar> = self.hazard_models()?.iter().flat_map(|m| m.covariates().collect::<Vec<_>>()).collect();
        if !self.inflation_params()?.overlay_is_inert() {
            vars.push(ClimateVar::NearSurfaceTemp);
        }
        vars.sort();
        vars.dedup();
        Ok(vars)
    }
}

pub(crate) fn parse_var(name: &str) -> Result<ClimateVar> {
    ClimateVar::from_name(name).ok_or_else(|| cfg(format!("unknown climate variable `{name}`")))
}

fn cfg(msg: impl Into<String>) -> DfaError {
    DfaError::Config(msg.into())
}

fn fixed_or_zero<const N: usize>(values: &[f64], what: &str) -> Result<[f64; N]> {
    if values.is_empty() {
        return Ok([0.0; N]);
    }
    values
        .try_into()
        .map_err(|_| cfg(format!("{what} needs {N} values (got {})", values.len())))
}

const _: () = assert!(OVERLAY_LAGS == 11);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_is_valid() {
        let c = RunConfig::default_config();
        c.validate().unwrap();
        assert_eq!(c.scenarios.len(), 4);
        assert_eq!(c.market.insurers.len(), 20);
        assert_eq!(c.hazard_models().unwrap().len(), 6);
    }

    #[test]
    fn shares_must_sum_to_one() {
        let mut c = RunConfig::default_config();
        c.market.insurers[0].share += 1e-6;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = DEFAULT_CONFIG.replace("[run]", "[run]\nbogus = 1");
        assert!(RunConfig::from_toml_str(&text, Path::new("x.toml")).is_err());
    }

    #[test]
    fn unknown_covariate_is_rejected() {
        let mut c = RunConfig::default_config();
        c.hazards[0].freq_coeffs.insert("rainfall".into(), 1.0);
        assert!(matches!(c.validate(), Err(DfaError::Config(_))));
    }
}
