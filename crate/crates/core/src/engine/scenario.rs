//! Per-scenario inputs: annual socio-economic series and the climate ensemble.

use std::collections::BTreeMap;
use std::path::Path;

use crate::climate::{ClimateEnsemble, ClimateVar, EnsembleMember, MemberSeries};
use crate::error::{DfaError, Result};

use super::config::{parse_var, RunConfig, ScenarioSection};
use super::data::{read_period_series, read_year_series};
use super::spline::annual_series;

/// Inputs of one scenario. Every series holds `years + 1` values, index 0
/// being the start year.
#[derive(Clone, Debug)]
pub struct ScenarioData {
    pub scenario_id: String,
    pub start_year: i32,
    pub years: usize,
    pub gdp: Vec<f64>,
    pub potential_growth: Vec<f64>,
    pub population: Vec<f64>,
    pub brown_production: Vec<f64>,
    pub ensemble: ClimateEnsemble,
}

impl ScenarioData {
    /// Builds scenario `s` of `config`. Relative file paths resolve against
    /// `base_dir`.
    pub fn build(config: &RunConfig, s: &ScenarioSection, base_dir: &Path) -> Result<ScenarioData> {
        let start = config.run.start_year;
        let years = config.horizon_years();
        let series = |knots: &[(i32, f64)], file: &Option<std::path::PathBuf>, what: &str, positive: bool| -> Result<Vec<f64>> {
            let knots = match (file, knots.is_empty()) {
                (Some(f), true) => read_year_series(&base_dir.join(f))?,
                (None, false) => knots.to_vec(),
                (Some(_), false) => {
                    return Err(DfaError::Config(format!(
                        "scenario `{}`: {what} given both inline and as a file",
                        s.id
                    )))
                }
                (None, true) => return Err(DfaError::Config(format!("scenario `{}`: {what} is missing", s.id))),
            };
            let values = annual_series(&knots, start, years + 1, &format!("scenario `{}` {what}", s.id))?;
            if positive {
                if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
                    return Err(DfaError::Config(format!(
                        "scenario `{}`: interpolated {what} must stay positive (found {v})",
                        s.id
                    )));
                }
            }
            Ok(values)
        };
        let gdp = series(&s.gdp, &s.gdp_file, "gdp", true)?;
        let potential_growth = series(&s.potential_growth, &s.potential_growth_file, "potential_growth", false)?;
        let population = series(&s.population, &s.population_file, "population", true)?;
        let brown_production = series(&s.brown_production, &s.brown_production_file, "brown_production", true)?;
        let ensemble = build_ensemble(config, s, base_dir)?;
        Ok(ScenarioData {
            scenario_id: s.id.clone(),
            start_year: start,
            years,
            gdp,
            potential_growth,
            population,
            brown_production,
            ensemble,
        })
    }
}

/// Climate ensemble covering the start year and every projection year.
///
/// A member provides each variable it has bias parameters for. Forecasts come
/// from `<climate_dir>/<member>/<variable>.csv` when the scenario names a
/// directory, and otherwise are synthesised from the configured climatology
/// plus the scenario's linear trend, expressed in the member's raw units.
pub fn build_ensemble(config: &RunConfig, s: &ScenarioSection, base_dir: &Path) -> Result<ClimateEnsemble> {
    let start = config.run.start_year;
    let years = config.horizon_years() + 1;
    let required = config.required_climate_vars()?;
    let mut members = Vec::with_capacity(config.climate.members.len());
    for m in &config.climate.members {
        let mut series = BTreeMap::new();
        for (name, bias) in &m.bias {
            let var = parse_var(name)?;
            if !required.contains(&var) {
                continue;
            }
            let monthly = var.resolution().periods_per_year() > 1;
            let forecast = match &s.climate_dir {
                Some(dir) => {
                    let path = base_dir.join(dir).join(&m.id).join(format!("{name}.csv"));
                    read_period_series(&path, start, years, monthly)?
                }
                None => synthetic_forecast(config, s, var, m.trend_scale, bias.bias_intercept, bias.bias_slope, years)
                    .map_err(|e| DfaError::Config(format!("member `{}`: {e}", m.id)))?,
            };
            series.insert(var, MemberSeries { bias: *bias, forecast });
        }
        members.push(EnsembleMember {
            model_id: m.id.clone(),
            series,
        });
    }
    let ensemble = ClimateEnsemble::new(start, years, members, config.climate.fallback_member.as_deref(), &required)?;
    // surface missing variables now rather than on the first path
    for member in 0..ensemble.members().len() {
        for &var in &required {
            ensemble.corrected_forecast(member, var)?;
        }
    }
    Ok(ensemble)
}

fn synthetic_forecast(
    config: &RunConfig,
    s: &ScenarioSection,
    var: ClimateVar,
    trend_scale: f64,
    bias_intercept: f64,
    bias_slope: f64,
    years: usize,
) -> std::result::Result<Vec<f64>, String> {
    let base = config
        .climate
        .baseline
        .get(var.name())
        .ok_or_else(|| format!("no climatology for `{var}` and no climate_dir"))?;
    if bias_slope == 0.0 {
        return Err(format!("bias slope for `{var}` is zero"));
    }
    let trend = s.climate_trend.get(var.name()).copied().unwrap_or(0.0) * trend_scale;
    let per_year = base.len();
    Ok((0..years * per_year)
        .map(|i| {
            let t = (i / per_year) as f64;
            // raw value whose bias-corrected image is the target
            (base[i % per_year] + trend * t - bias_intercept) / bias_slope
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenarios_build() {
        let c = RunConfig::default_config();
        for s in &c.scenarios {
            let d = ScenarioData::build(&c, s, Path::new(".")).unwrap();
            assert_eq!(d.gdp.len(), c.horizon_years() + 1);
            assert_eq!(d.ensemble.years(), c.horizon_years() + 1);
            assert!(d.population.iter().all(|p| *p > 0.0));
        }
    }

    #[test]
    fn synthetic_forecast_corrects_to_climatology() {
        let c = RunConfig::default_config();
        let s = &c.scenarios[0];
        let e = build_ensemble(&c, s, Path::new(".")).unwrap();
        let sst = e.corrected_forecast(0, ClimateVar::Sst).unwrap();
        let base = &c.climate.baseline["sst"];
        let trend = s.climate_trend.get("sst").copied().unwrap_or(0.0) * c.climate.members[0].trend_scale;
        for (i, v) in sst.iter().enumerate().take(36) {
            let want = base[i % 12] + trend * (i / 12) as f64;
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn forecasts_from_files() {
        let d = tempfile::tempdir().unwrap();
        let mut c = RunConfig::default_config();
        c.run.end_year = c.run.start_year + 1;
        c.hazards.retain(|h| h.id == crate::hazard::HazardId::Flood);
        c.inflation.overlay_alpha.clear();
        c.inflation.overlay_beta.clear();
        c.climate.fallback_member = None;
        c.climate.members.truncate(1);
        let member = c.climate.members[0].id.clone();
        std::fs::create_dir_all(d.path().join("cl").join(&member)).unwrap();
        let body = format!("period,value\n{},50\n{},60\n", c.run.start_year, c.run.start_year + 1);
        std::fs::write(d.path().join("cl").join(&member).join("rx5day.csv"), body).unwrap();
        c.scenarios[0].climate_dir = Some("cl".into());
        let e = build_ensemble(&c, &c.scenarios[0], d.path()).unwrap();
        let b = c.climate.members[0].bias["rx5day"];
        let got = e.corrected_forecast(0, ClimateVar::Rx5day).unwrap();
        assert!((got[1] - (b.bias_intercept + b.bias_slope * 60.0)).abs() < 1e-12);

        std::fs::remove_file(d.path().join("cl").join(&member).join("rx5day.csv")).unwrap();
        assert!(build_ensemble(&c, &c.scenarios[0], d.path()).is_err());
    }
}
