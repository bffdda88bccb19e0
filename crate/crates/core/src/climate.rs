//! Stochastic climate covariates from a bias-corrected forecast ensemble.
//!
//! Each ensemble member carries a deterministic raw forecast per variable
//! together with an affine bias correction and a residual noise scale. A path
//! draws one member uniformly, corrects its forecasts and adds independent
//! Normal residuals period by period.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DfaError, Result};
use crate::rng::{substream, tags};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Annual,
    Monthly,
}

impl Resolution {
    pub fn periods_per_year(self) -> usize {
        match self {
            Resolution::Annual => 1,
            Resolution::Monthly => 12,
        }
    }
}

/// Climate covariates known to the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClimateVar {
    /// Largest five-day precipitation in the year (mm).
    Rx5day,
    /// Annual maximum of the fire weather index, land average.
    Mfwixx,
    /// Monthly sea-surface temperature over the cyclone basin (°C).
    Sst,
    /// Monthly east-coast SST gradient (°C).
    SstGradient,
    /// Monthly mean sea-level pressure (Pa).
    Mslp,
    /// Monthly near-surface air temperature (°C).
    NearSurfaceTemp,
    /// Monthly mid-tropospheric air temperature (°C).
    MidTropTemp,
}

impl ClimateVar {
    pub const ALL: [ClimateVar; 7] = [
        ClimateVar::Rx5day,
        ClimateVar::Mfwixx,
        ClimateVar::Sst,
        ClimateVar::SstGradient,
        ClimateVar::Mslp,
        ClimateVar::NearSurfaceTemp,
        ClimateVar::MidTropTemp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClimateVar::Rx5day => "rx5day",
            ClimateVar::Mfwixx => "mfwixx",
            ClimateVar::Sst => "sst",
            ClimateVar::SstGradient => "sst_gradient",
            ClimateVar::Mslp => "mslp",
            ClimateVar::NearSurfaceTemp => "near_surface_temp",
            ClimateVar::MidTropTemp => "mid_trop_temp",
        }
    }

    pub fn from_name(name: &str) -> Option<ClimateVar> {
        ClimateVar::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn resolution(self) -> Resolution {
        match self {
            ClimateVar::Rx5day | ClimateVar::Mfwixx => Resolution::Annual,
            _ => Resolution::Monthly,
        }
    }
}

impl fmt::Display for ClimateVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Affine quantile-map coefficients and residual noise for one member/variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasCorrection {
    pub bias_intercept: f64,
    pub bias_slope: f64,
    pub noise_sigma: f64,
}

impl BiasCorrection {
    pub const IDENTITY: BiasCorrection = BiasCorrection {
        bias_intercept: 0.0,
        bias_slope: 1.0,
        noise_sigma: 0.0,
    };
}

pub fn apply_bias_correction(raw: f64, bias: &BiasCorrection) -> f64 {
    bias.bias_intercept + bias.bias_slope * raw
}

/// Raw forecast of one variable by one member, over the whole projection.
#[derive(Clone, Debug)]
pub struct MemberSeries {
    pub bias: BiasCorrection,
    pub forecast: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub model_id: String,
    pub series: BTreeMap<ClimateVar, MemberSeries>,
}

/// One simulated path of climate covariates.
///
/// Year index 0 is the projection start year; monthly series hold
/// `12 * years` values in calendar order.
#[derive(Clone, Debug)]
pub struct ClimateTrajectory {
    pub start_year: i32,
    pub years: usize,
    pub member: usize,
    series: [Option<Vec<f64>>; 7],
}

impl ClimateTrajectory {
    pub fn new(start_year: i32, years: usize, member: usize) -> Self {
        ClimateTrajectory {
            start_year,
            years,
            member,
            series: Default::default(),
        }
    }

    pub fn insert(&mut self, var: ClimateVar, values: Vec<f64>) -> Result<()> {
        let expected = self.years * var.resolution().periods_per_year();
        if values.len() != expected {
            return Err(DfaError::LengthMismatch {
                what: "climate series",
                left: values.len(),
                right: expected,
            });
        }
        self.series[var.index()] = Some(values);
        Ok(())
    }

    pub fn series(&self, var: ClimateVar) -> Option<&[f64]> {
        self.series[var.index()].as_deref()
    }

    pub fn has(&self, var: ClimateVar) -> bool {
        self.series[var.index()].is_some()
    }

    /// Value of `var` in year index `year`, optionally at a calendar month.
    ///
    /// Monthly variables queried without a month return the annual mean;
    /// annual variables queried with a month return the annual value.
    pub fn value(&self, var: ClimateVar, year: usize, month: Option<usize>) -> Option<f64> {
        if year >= self.years {
            return None;
        }
        let s = self.series(var)?;
        match (var.resolution(), month) {
            (Resolution::Annual, _) => Some(s[year]),
            (Resolution::Monthly, Some(m)) => Some(s[12 * year + m]),
            (Resolution::Monthly, None) => Some(s[12 * year..12 * year + 12].iter().sum::<f64>() / 12.0),
        }
    }
}

#[derive(Clone, Debug)]
struct PreparedSeries {
    corrected: Vec<f64>,
    sigma: f64,
}

/// Ensemble of members for one scenario, with bias corrections applied up
/// front. Immutable once built and shareable between workers.
#[derive(Clone, Debug)]
pub struct ClimateEnsemble {
    start_year: i32,
    years: usize,
    members: Vec<EnsembleMember>,
    fallback: Option<usize>,
    required: Vec<ClimateVar>,
    prepared: Vec<[Option<PreparedSeries>; 7]>,
}

impl ClimateEnsemble {
    /// `years` counts calendar years from `start_year` inclusive. `fallback`
    /// names the member that supplies variables other members lack.
    pub fn new(
        start_year: i32,
        years: usize,
        members: Vec<EnsembleMember>,
        fallback: Option<&str>,
        required: &[ClimateVar],
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(DfaError::Config("climate ensemble has no members".into()));
        }
        let fallback = match fallback {
            Some(id) => Some(
                members
                    .iter()
                    .position(|m| m.model_id == id)
                    .ok_or_else(|| DfaError::Config(format!("fallback member `{id}` is not in the ensemble")))?,
            ),
            None => None,
        };
        let mut prepared = Vec::with_capacity(members.len());
        for member in &members {
            let mut slots: [Option<PreparedSeries>; 7] = Default::default();
            for (&var, s) in &member.series {
                let expected = years * var.resolution().periods_per_year();
                if s.forecast.len() < expected {
                    return Err(DfaError::Config(format!(
                        "member `{}` variable `{var}`: forecast has {} periods, horizon needs {expected}",
                        member.model_id,
                        s.forecast.len()
                    )));
                }
                if !(s.bias.noise_sigma >= 0.0) || !s.bias.bias_intercept.is_finite() || !s.bias.bias_slope.is_finite() {
                    return Err(DfaError::Config(format!(
                        "member `{}` variable `{var}`: invalid bias/noise parameters",
                        member.model_id
                    )));
                }
                if let Some(bad) = s.forecast[..expected].iter().position(|v| !v.is_finite()) {
                    return Err(DfaError::Config(format!(
                        "member `{}` variable `{var}`: gap or non-finite value at period {bad}",
                        member.model_id
                    )));
                }
                slots[var.index()] = Some(PreparedSeries {
                    corrected: s.forecast[..expected]
                        .iter()
                        .map(|&raw| apply_bias_correction(raw, &s.bias))
                        .collect(),
                    sigma: s.bias.noise_sigma,
                });
            }
            prepared.push(slots);
        }
        let mut required = required.to_vec();
        required.sort();
        required.dedup();
        Ok(ClimateEnsemble {
            start_year,
            years,
            members,
            fallback,
            required,
            prepared,
        })
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn years(&self) -> usize {
        self.years
    }

    pub fn required(&self) -> &[ClimateVar] {
        &self.required
    }

    fn series_for(&self, member: usize, var: ClimateVar) -> Result<&PreparedSeries> {
        if let Some(s) = &self.prepared[member][var.index()] {
            return Ok(s);
        }
        if let Some(fb) = self.fallback {
            if let Some(s) = &self.prepared[fb][var.index()] {
                return Ok(s);
            }
        }
        Err(DfaError::MissingVariable {
            member: self.members[member].model_id.clone(),
            variable: var.name().to_string(),
        })
    }

    /// Bias-corrected deterministic forecast of `var` for `member`, after fallback.
    pub fn corrected_forecast(&self, member: usize, var: ClimateVar) -> Result<&[f64]> {
        Ok(&self.series_for(member, var)?.corrected)
    }

    /// Simulates one trajectory. The member is drawn from its own sub-stream
    /// and every variable from a dedicated sub-stream of `seed`, so the result
    /// does not depend on the order in which variables are generated.
    pub fn simulate_path(&self, seed: u64) -> Result<ClimateTrajectory> {
        let member = substream(seed, tags::MEMBER).random_range(0..self.members.len());
        self.simulate_with_member(seed, member, &self.required)
    }

    pub fn simulate_with_member(&self, seed: u64, member: usize, vars: &[ClimateVar]) -> Result<ClimateTrajectory> {
        self.simulate_years(seed, member, vars, self.years)
    }

    /// Like [`simulate_path`](Self::simulate_path) but only for the first
    /// `years` years. The values agree with the full trajectory.
    pub fn simulate_path_prefix(&self, seed: u64, years: usize) -> Result<ClimateTrajectory> {
        let member = substream(seed, tags::MEMBER).random_range(0..self.members.len());
        self.simulate_years(seed, member, &self.required, years.min(self.years))
    }

    fn simulate_years(&self, seed: u64, member: usize, vars: &[ClimateVar], years: usize) -> Result<ClimateTrajectory> {
        let mut traj = ClimateTrajectory::new(self.start_year, years, member);
        for &var in vars {
            let s = self.series_for(member, var)?;
            let periods = years * var.resolution().periods_per_year();
            let values = if s.sigma > 0.0 {
                let mut rng = substream(seed, tags::CLIMATE_VAR + var.index() as u64);
                s.corrected[..periods]
                    .iter()
                    .map(|&c| {
                        let z: f64 = rng.sample(StandardNormal);
                        c + s.sigma * z
                    })
                    .collect()
            } else {
                s.corrected[..periods].to_vec()
            };
            traj.insert(var, values)?;
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    const ACCESS_CM2_NST: BiasCorrection = BiasCorrection {
        bias_intercept: 2.257,
        bias_slope: 0.883,
        noise_sigma: 1.271,
    };

    fn member(id: &str, var: ClimateVar, bias: BiasCorrection, forecast: Vec<f64>) -> EnsembleMember {
        let mut series = BTreeMap::new();
        series.insert(var, MemberSeries { bias, forecast });
        EnsembleMember {
            model_id: id.into(),
            series,
        }
    }

    #[test]
    fn bias_correction_examples() {
        assert_eq!(apply_bias_correction(20.0, &BiasCorrection::IDENTITY), 20.0);
        assert!((apply_bias_correction(20.0, &ACCESS_CM2_NST) - 19.917).abs() < 1e-12);
        let b = BiasCorrection {
            bias_intercept: -3.5,
            bias_slope: 1.2,
            noise_sigma: 0.0,
        };
        assert_eq!(apply_bias_correction(0.0, &b), -3.5);
    }

    #[test]
    fn bias_correction_is_affine() {
        let f = |x| apply_bias_correction(x, &ACCESS_CM2_NST);
        let (a, b, c) = (f(-4.0), f(1.0), f(11.0));
        let slope1 = (b - a) / 5.0;
        let slope2 = (c - b) / 10.0;
        assert!((slope1 - slope2).abs() < 1e-12);
        assert!((slope1 - 0.883).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_single_member_is_deterministic() {
        let bias = BiasCorrection {
            noise_sigma: 0.0,
            ..ACCESS_CM2_NST
        };
        let forecast: Vec<f64> = (0..36).map(|i| 20.0 + i as f64 * 0.1).collect();
        let ens = ClimateEnsemble::new(
            2025,
            3,
            vec![member("A", ClimateVar::NearSurfaceTemp, bias, forecast.clone())],
            None,
            &[ClimateVar::NearSurfaceTemp],
        )
        .unwrap();
        let a = ens.simulate_path(1).unwrap();
        let b = ens.simulate_path(999).unwrap();
        let expected: Vec<f64> = forecast.iter().map(|&x| apply_bias_correction(x, &bias)).collect();
        assert_eq!(a.series(ClimateVar::NearSurfaceTemp).unwrap(), expected.as_slice());
        assert_eq!(b.series(ClimateVar::NearSurfaceTemp).unwrap(), expected.as_slice());
    }

    #[test]
    fn residual_scale_matches_member_sigma() {
        // 100_000 monthly periods = 8_334 years (rounded up)
        let years = 8_334;
        let forecast = vec![20.0; 12 * years];
        let ens = ClimateEnsemble::new(
            2025,
            years,
            vec![member("ACCESS-CM2", ClimateVar::NearSurfaceTemp, ACCESS_CM2_NST, forecast)],
            None,
            &[ClimateVar::NearSurfaceTemp],
        )
        .unwrap();
        let traj = ens.simulate_path(2024).unwrap();
        let corrected = apply_bias_correction(20.0, &ACCESS_CM2_NST);
        let resid: Vec<f64> = traj
            .series(ClimateVar::NearSurfaceTemp)
            .unwrap()
            .iter()
            .map(|v| v - corrected)
            .collect();
        let n = resid.len() as f64;
        let m = stats::mean(&resid);
        let sd = stats::sample_variance(&resid).sqrt();
        assert!((sd / 1.271 - 1.0).abs() < 0.01, "sd = {sd}");
        // mean within 3 standard errors of zero
        assert!(m.abs() < 3.0 * 1.271 / n.sqrt(), "mean = {m}");
        // variance within 3 standard errors of sigma^2 (Normal: se = sigma^2 sqrt(2/n))
        let var = sd * sd;
        assert!((var - 1.271f64.powi(2)).abs() < 3.0 * 1.271f64.powi(2) * (2.0 / n).sqrt());
    }

    #[test]
    fn members_are_selected_uniformly() {
        let b = BiasCorrection::IDENTITY;
        let ens = ClimateEnsemble::new(
            2025,
            1,
            vec![
                member("A", ClimateVar::Rx5day, b, vec![1.0]),
                member("B", ClimateVar::Rx5day, b, vec![2.0]),
            ],
            None,
            &[ClimateVar::Rx5day],
        )
        .unwrap();
        let n = 10_000;
        let firsts = (0..n)
            .filter(|&p| ens.simulate_path(crate::rng::derive_path_seed(3, 0, p)).unwrap().member == 0)
            .count();
        let share = firsts as f64 / n as f64;
        assert!((share - 0.5).abs() < 0.02, "share = {share}");
    }

    #[test]
    fn same_seed_same_path_regardless_of_variable_order() {
        let b = BiasCorrection {
            noise_sigma: 0.5,
            ..BiasCorrection::IDENTITY
        };
        let mut series = BTreeMap::new();
        series.insert(ClimateVar::Sst, MemberSeries { bias: b, forecast: vec![25.0; 24] });
        series.insert(ClimateVar::Rx5day, MemberSeries { bias: b, forecast: vec![70.0; 2] });
        let ens = ClimateEnsemble::new(
            2025,
            2,
            vec![EnsembleMember {
                model_id: "A".into(),
                series,
            }],
            None,
            &[ClimateVar::Sst, ClimateVar::Rx5day],
        )
        .unwrap();
        let fwd = ens.simulate_with_member(11, 0, &[ClimateVar::Sst, ClimateVar::Rx5day]).unwrap();
        let rev = ens.simulate_with_member(11, 0, &[ClimateVar::Rx5day, ClimateVar::Sst]).unwrap();
        for v in [ClimateVar::Sst, ClimateVar::Rx5day] {
            assert_eq!(fwd.series(v), rev.series(v));
        }
    }

    #[test]
    fn missing_variable_names_the_variable() {
        let ens = ClimateEnsemble::new(
            2025,
            1,
            vec![member("A", ClimateVar::Rx5day, BiasCorrection::IDENTITY, vec![1.0])],
            None,
            &[ClimateVar::Rx5day, ClimateVar::Mfwixx],
        )
        .unwrap();
        let err = ens.simulate_path(0).unwrap_err();
        assert!(err.to_string().contains("mfwixx"), "{err}");
    }

    #[test]
    fn fallback_member_supplies_missing_variable() {
        let ens = ClimateEnsemble::new(
            2025,
            1,
            vec![
                member("A", ClimateVar::Rx5day, BiasCorrection::IDENTITY, vec![1.0]),
                member("B", ClimateVar::Mfwixx, BiasCorrection::IDENTITY, vec![40.0]),
            ],
            Some("B"),
            &[ClimateVar::Mfwixx],
        )
        .unwrap();
        let t = ens.simulate_with_member(0, 0, &[ClimateVar::Mfwixx]).unwrap();
        assert_eq!(t.value(ClimateVar::Mfwixx, 0, None), Some(40.0));
    }
}
