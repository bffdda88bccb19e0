//! Insurer liabilities: catastrophe losses net of aggregate excess-of-loss
//! cover, Tweedie non-catastrophe losses, and premium pricing for insurers
//! and the market reinsurer.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::climate::ClimateVar;
use crate::error::{DfaError, Result};
use crate::hazard::{aggregate_moments, hazard_event_params, poisson_count, EventParams, HazardModel};
use crate::rng::{substream, substream_seed, SimRng};

#[derive(Clone, Debug, PartialEq)]
pub struct InsurerSpec {
    pub insurer_id: String,
    pub market_share: f64,
    /// Reference-year excess point of the aggregate cover.
    pub xol_excess: f64,
    /// Reference-year limit of the aggregate cover.
    pub xol_limit: f64,
}

impl InsurerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.market_share > 0.0 && self.market_share <= 1.0) {
            return Err(DfaError::Config(format!(
                "insurer `{}`: market share must lie in (0, 1] (got {})",
                self.insurer_id, self.market_share
            )));
        }
        if !(self.xol_excess >= 0.0) || !(self.xol_limit >= 0.0) || !self.xol_excess.is_finite() {
            return Err(DfaError::Config(format!(
                "insurer `{}`: excess and limit must be non-negative",
                self.insurer_id
            )));
        }
        Ok(())
    }
}

/// Checks every insurer and that shares sum to one within 1e-9.
pub fn validate_market(insurers: &[InsurerSpec]) -> Result<()> {
    if insurers.is_empty() {
        return Err(DfaError::Config("market has no insurers".into()));
    }
    let mut ids = BTreeSet::new();
    for ins in insurers {
        ins.validate()?;
        if !ids.insert(ins.insurer_id.as_str()) {
            return Err(DfaError::Config(format!("duplicate insurer id `{}`", ins.insurer_id)));
        }
    }
    let total: f64 = insurers.iter().map(|i| i.market_share).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DfaError::Config(format!("market shares sum to {total}, expected 1")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonCatParams {
    /// Mean loss per risk-year, reference-year currency.
    pub mu: f64,
    pub dispersion: f64,
    pub power: f64,
    pub exposure_intercept: f64,
    /// Risks per person.
    pub exposure_slope: f64,
}

impl NonCatParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.dispersion > 0.0) || !(self.power > 1.0 && self.power < 2.0) {
            return Err(DfaError::Config(format!(
                "non-catastrophe parameters need mu > 0, dispersion > 0, 1 < p < 2 (got mu={}, phi={}, p={})",
                self.mu, self.dispersion, self.power
            )));
        }
        Ok(())
    }

    pub fn poisson_rate(&self) -> f64 {
        self.mu.powf(2.0 - self.power) / (self.dispersion * (2.0 - self.power))
    }

    pub fn gamma_shape(&self) -> f64 {
        (2.0 - self.power) / (self.power - 1.0)
    }

    pub fn gamma_scale(&self) -> f64 {
        self.dispersion * (self.power - 1.0) * self.mu.powf(self.power - 1.0)
    }

    /// Number of risks for a population.
    pub fn exposure(&self, population: f64) -> Result<f64> {
        let w = self.exposure_intercept + self.exposure_slope * population;
        if !(w > 0.0) {
            return Err(DfaError::NonPositive {
                what: "non-catastrophe exposure",
                value: w,
            });
        }
        Ok(w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReinsuranceMarketParams {
    pub risk_loading: f64,
    pub sensitivity: f64,
    pub reference_solvency: f64,
    pub initial_reinsurer_capital: f64,
}

impl ReinsuranceMarketParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.risk_loading >= 0.0) || !(self.sensitivity >= 0.0) || !(self.reference_solvency > 0.0) {
            return Err(DfaError::Config(format!(
                "reinsurance market needs loading >= 0, k1 >= 0, S0 > 0 (got {}, {}, {})",
                self.risk_loading, self.sensitivity, self.reference_solvency
            )));
        }
        if !self.initial_reinsurer_capital.is_finite() {
            return Err(DfaError::Config("initial reinsurer capital must be finite".into()));
        }
        Ok(())
    }
}

/// Splits an insurer's share of the market loss into the retained part and
/// the recovery from its aggregate cover. Returns `(net, recovery)`.
pub fn net_cat_loss(market_loss: f64, insurer: &InsurerSpec, indexed_excess: f64, indexed_limit: f64) -> (f64, f64) {
    let gross = insurer.market_share * market_loss;
    let recovery = layer_payout(gross, indexed_excess, indexed_limit);
    (gross - recovery, recovery)
}

#[inline]
fn layer_payout(gross: f64, excess: f64, limit: f64) -> f64 {
    (gross - excess).max(0.0).min(limit)
}

/// One draw of the per-risk non-catastrophe loss: a Poisson number of Gamma
/// jumps.
pub fn simulate_noncat_loss<R: Rng + ?Sized>(params: &NonCatParams, rng: &mut R) -> f64 {
    let n = poisson_count(params.poisson_rate(), rng);
    if n == 0 {
        return 0.0;
    }
    // a sum of n iid Gamma(k, s) jumps is Gamma(n k, s)
    match Gamma::new(n as f64 * params.gamma_shape(), params.gamma_scale()) {
        Ok(g) => g.sample(rng),
        Err(_) => 0.0,
    }
}

pub fn scaled_noncat_loss(
    unit_loss: f64,
    population: f64,
    params: &NonCatParams,
    insurer_share: f64,
    cpi_ratio: f64,
) -> Result<f64> {
    if !(population > 0.0) {
        return Err(DfaError::NonPositive {
            what: "population",
            value: population,
        });
    }
    if !(cpi_ratio > 0.0) {
        return Err(DfaError::NonPositive {
            what: "CPI ratio",
            value: cpi_ratio,
        });
    }
    Ok(unit_loss * params.exposure(population)? * insurer_share * cpi_ratio)
}

/// Mean and variance of an insurer's non-catastrophe loss. Scaling a
/// Tweedie(mu, phi) variable by c gives mean c mu and variance c^2 phi mu^p.
pub fn noncat_moments(params: &NonCatParams, population: f64, insurer_share: f64, cpi_ratio: f64) -> Result<(f64, f64)> {
    let c = scaled_noncat_loss(1.0, population, params, insurer_share, cpi_ratio)?;
    Ok((c * params.mu, c * c * params.dispersion * params.mu.powf(params.power)))
}

/// Standard-deviation loaded premium over catastrophe and other losses.
pub fn gross_premium(cat_mean: f64, cat_var: f64, noncat_mean: f64, noncat_var: f64, loading: f64) -> f64 {
    (cat_mean + loading * cat_var.max(0.0).sqrt()) + (noncat_mean + loading * noncat_var.max(0.0).sqrt())
}

/// Reinsurance premium with the hard-market uplift applied when the
/// reinsurer's solvency ratio was below its reference level.
pub fn reinsurance_premium(
    layer_mean: f64,
    layer_var: f64,
    loading: f64,
    prev_solvency: f64,
    market: &ReinsuranceMarketParams,
) -> f64 {
    let base = layer_mean + loading * layer_var.max(0.0).sqrt();
    let uplifted = base * (-market.sensitivity * (prev_solvency - market.reference_solvency)).exp();
    base.max(uplifted)
}

/// Returns `(capital, solvency)`.
pub fn step_reinsurer_capital(
    prev_capital: f64,
    total_premiums: f64,
    total_recoveries: f64,
    investment_return: f64,
) -> Result<(f64, f64)> {
    let capital = (1.0 + investment_return) * (prev_capital + total_premiums) - total_recoveries;
    if !(total_premiums > 0.0) {
        return Err(DfaError::UndefinedSolvency(total_premiums));
    }
    Ok((capital, capital / total_premiums))
}

/// Aggregate cover in normalised (reference-year) units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerTerms {
    pub share: f64,
    pub excess: f64,
    pub limit: f64,
}

impl From<&InsurerSpec> for LayerTerms {
    fn from(ins: &InsurerSpec) -> Self {
        LayerTerms {
            share: ins.market_share,
            excess: ins.xol_excess,
            limit: ins.xol_limit,
        }
    }
}

/// Mean and variance of a loss quantity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
}

impl Moments {
    pub fn scaled(self, factor: f64) -> Moments {
        Moments {
            mean: self.mean * factor,
            var: self.var * factor * factor,
        }
    }
}

/// Analytic moments of the normalised market aggregate summed over
/// independent hazards. `periods[h]` holds the period parameters of hazard h.
pub fn market_gross_moments(models: &[HazardModel], periods: &[Vec<EventParams>]) -> Moments {
    models.iter().zip(periods).fold(Moments::default(), |acc, (m, p)| {
        let (mean, var) = aggregate_moments(p, m.sev_sigma);
        Moments {
            mean: acc.mean + mean,
            var: acc.var + var,
        }
    })
}

/// Largest event count per sample and hazard held in the bank; higher
/// counts draw their extra severities from a per-sample stream.
pub const BANK_EVENT_CAP: usize = 48;

struct BankHazard {
    sigma: f64,
    varying: bool,
    /// Count uniforms in ascending order.
    u_sorted: Vec<f64>,
    /// Sample index of each sorted position.
    order: Vec<u32>,
    /// Event-major tables: entry `i * n + p` belongs to event `i` of sorted
    /// position `p`, so one count level reads a contiguous run.
    /// Stationary severity holds running sums of `exp(sigma z)`, varying
    /// severity the terms themselves.
    sev: Vec<f64>,
    /// Varying severity: uniforms selecting the event month.
    v: Vec<f64>,
}

/// Common random numbers for inner Monte Carlo pricing of aggregate layers.
///
/// One bank serves every pricing call of a scenario, so premiums are a
/// deterministic function of the covariates and differences between years and
/// paths are not blurred by inner sampling noise.
pub struct LayerBank {
    n: usize,
    seed: u64,
    hazards: Vec<BankHazard>,
}

/// Reusable buffer for [`LayerBank::layer_moments`].
#[derive(Default)]
pub struct LayerScratch {
    x: Vec<f64>,
}

impl LayerBank {
    pub fn new(models: &[HazardModel], inner_samples: usize, seed: u64) -> Result<LayerBank> {
        if inner_samples < 2 || inner_samples > u32::MAX as usize {
            return Err(DfaError::Config(format!("inner_samples out of range (got {inner_samples})")));
        }
        let n = inner_samples;
        let cap = BANK_EVENT_CAP;
        let hazards = models
            .iter()
            .enumerate()
            .map(|(h, m)| {
                let varying = m.resolution.periods_per_year() > 1 && !m.is_stationary_severity();
                let mut rng = substream(seed, h as u64);
                let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let mut order: Vec<u32> = (0..n as u32).collect();
                order.sort_by(|&a, &b| u[a as usize].total_cmp(&u[b as usize]).then(a.cmp(&b)));
                let u_sorted: Vec<f64> = order.iter().map(|&k| u[k as usize]).collect();
                // draws are generated sample by sample, then transposed
                let terms: Vec<f64> = (0..n * cap)
                    .map(|_| (m.sev_sigma * rng.sample::<f64, _>(StandardNormal)).exp())
                    .collect();
                let mut sev = transpose(&terms, &order, cap);
                let mut v = Vec::new();
                if varying {
                    let months: Vec<f64> = (0..n * cap).map(|_| rng.random::<f64>()).collect();
                    v = transpose(&months, &order, cap);
                } else {
                    for i in 1..cap {
                        let (done, rest) = sev.split_at_mut(i * n);
                        for (cur, prev) in rest[..n].iter_mut().zip(&done[(i - 1) * n..]) {
                            *cur += prev;
                        }
                    }
                }
                BankHazard {
                    sigma: m.sev_sigma,
                    varying,
                    u_sorted,
                    order,
                    sev,
                    v,
                }
            })
            .collect();
        Ok(LayerBank { n, seed, hazards })
    }

    pub fn inner_samples(&self) -> usize {
        self.n
    }

    pub fn hazard_count(&self) -> usize {
        self.hazards.len()
    }

    /// Normalised market aggregate loss of every inner sample, left in
    /// `scratch` and returned as a slice.
    pub fn aggregate_samples<'a>(&self, periods: &[Vec<EventParams>], scratch: &'a mut LayerScratch) -> Result<&'a [f64]> {
        if periods.len() != self.hazards.len() {
            return Err(DfaError::LengthMismatch {
                what: "hazard parameters vs layer bank",
                left: periods.len(),
                right: self.hazards.len(),
            });
        }
        scratch.x.clear();
        scratch.x.resize(self.n, 0.0);
        for (h, (hz, params)) in self.hazards.iter().zip(periods).enumerate() {
            self.add_hazard(h, hz, params, &mut scratch.x);
        }
        Ok(&scratch.x)
    }

    fn add_hazard(&self, h: usize, hz: &BankHazard, params: &[EventParams], x: &mut [f64]) {
        let total: f64 = params.iter().map(|p| p.rate).sum();
        if !(total > 0.0) || params.is_empty() {
            return;
        }
        let n_all = self.n;
        let cap = BANK_EVENT_CAP;
        let mut month_cdf = [1.0; 12];
        let mut month_scale = [0.0; 12];
        let varying = hz.varying && params.len() > 1;
        if varying {
            let mut acc = 0.0;
            for (m, p) in params.iter().enumerate().take(12) {
                acc += p.rate;
                month_cdf[m] = acc / total;
                month_scale[m] = p.log_location.exp();
            }
        }
        let scale = params[0].log_location.exp();
        let n_max = (total + 20.0 * total.sqrt() + 50.0) as u64;
        let ln_rate = total.ln();

        let mut pos = 0usize;
        let mut count = 0u64;
        let mut ln_pmf = -total;
        let mut cdf = 0.0;
        while pos < n_all {
            cdf += ln_pmf.exp();
            let end = if count >= n_max {
                n_all
            } else {
                pos + hz.u_sorted[pos..].partition_point(|&u| u < cdf)
            };
            let n = count as usize;
            if n > 0 && end > pos {
                let order = &hz.order[pos..end];
                let banked = n.min(cap);
                if varying {
                    for i in 0..banked {
                        let row = i * n_all;
                        let terms = &hz.sev[row + pos..row + end];
                        let months = &hz.v[row + pos..row + end];
                        for ((&k, &e), &v) in order.iter().zip(terms).zip(months) {
                            x[k as usize] += month_scale[month_of(v, &month_cdf)] * e;
                        }
                    }
                } else {
                    let row = (banked - 1) * n_all;
                    for (&k, &s) in order.iter().zip(&hz.sev[row + pos..row + end]) {
                        x[k as usize] += scale * s;
                    }
                }
                if n > cap {
                    for &k in order {
                        let mut rng = self.overflow_rng(h, k as usize);
                        let mut s = 0.0;
                        for _ in cap..n {
                            let z: f64 = rng.sample(StandardNormal);
                            s += if varying {
                                let m = month_of(rng.random::<f64>(), &month_cdf);
                                month_scale[m] * (hz.sigma * z).exp()
                            } else {
                                scale * (hz.sigma * z).exp()
                            };
                        }
                        x[k as usize] += s;
                    }
                }
            }
            pos = end;
            count += 1;
            ln_pmf += ln_rate - (count as f64).ln();
        }
    }

    fn overflow_rng(&self, h: usize, k: usize) -> SimRng {
        substream(substream_seed(self.seed, 1_000 + h as u64), k as u64)
    }

    /// Inner Monte Carlo mean and variance of each layer's recovery, in the
    /// same normalised units as the layer terms.
    pub fn layer_moments(&self, periods: &[Vec<EventParams>], layers: &[LayerTerms], scratch: &mut LayerScratch) -> Result<Vec<Moments>> {
        let x = self.aggregate_samples(periods, scratch)?;
        Ok(layer_moments_of_samples(x, layers))
    }
}

/// Event-major copy of sample-major `src` (`cap` entries per sample), with
/// samples taken in `order`.
fn transpose(src: &[f64], order: &[u32], cap: usize) -> Vec<f64> {
    let n = order.len();
    let mut out = vec![0.0; n * cap];
    for (p, &k) in order.iter().enumerate() {
        let k = k as usize;
        for i in 0..cap {
            out[i * n + p] = src[k * cap + i];
        }
    }
    out
}

#[inline]
fn month_of(v: f64, cdf: &[f64; 12]) -> usize {
    cdf.iter().position(|&c| v < c).unwrap_or(11)
}

/// Sample mean and unbiased variance of each layer's recovery over a set of
/// aggregate loss samples.
pub fn layer_moments_of_samples(x: &[f64], layers: &[LayerTerms]) -> Vec<Moments> {
    let n = x.len() as f64;
    let threshold = layers
        .iter()
        .map(|l| l.excess / l.share)
        .fold(f64::INFINITY, f64::min);
    let mut sums = vec![(0.0f64, 0.0f64); layers.len()];
    for &xk in x {
        if xk <= threshold {
            continue;
        }
        for (l, s) in layers.iter().zip(sums.iter_mut()) {
            let pay = layer_payout(l.share * xk, l.excess, l.limit);
            s.0 += pay;
            s.1 += pay * pay;
        }
    }
    sums.into_iter()
        .map(|(s, ss)| {
            let mean = s / n;
            let var = if n > 1.0 { ((ss - s * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
            Moments { mean, var }
        })
        .collect()
}

/// Premium moments of one insurer's catastrophe exposure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatPremiumMoments {
    pub gross_mean: f64,
    pub gross_var: f64,
    pub layer_mean: f64,
    pub layer_var: f64,
}

/// Catastrophe premium moments for one insurer given covariate values for
/// each model period (`covariates[h]` has one map for annual models and
/// twelve for monthly models). Gross moments are analytic; layer moments use
/// `inner_samples` draws from a bank seeded by `rng`.
pub fn cat_premium_moments<R: Rng + ?Sized>(
    models: &[HazardModel],
    covariates: &[Vec<BTreeMap<ClimateVar, f64>>],
    insurer: &InsurerSpec,
    inner_samples: usize,
    rng: &mut R,
) -> Result<CatPremiumMoments> {
    if inner_samples < 1000 {
        return Err(DfaError::TooShort {
            what: "inner samples",
            needed: 1000,
            got: inner_samples,
        });
    }
    if covariates.len() != models.len() {
        return Err(DfaError::LengthMismatch {
            what: "covariate sets vs hazard models",
            left: covariates.len(),
            right: models.len(),
        });
    }
    let periods = models
        .iter()
        .zip(covariates)
        .map(|(m, cov)| {
            let expected = m.resolution.periods_per_year();
            if cov.len() != expected {
                return Err(DfaError::LengthMismatch {
                    what: "covariate periods",
                    left: cov.len(),
                    right: expected,
                });
            }
            cov.iter().map(|c| hazard_event_params(m, c)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let gross = market_gross_moments(models, &periods);
    let bank = LayerBank::new(models, inner_samples, rng.random())?;
    let layer = bank.layer_moments(&periods, &[LayerTerms::from(insurer)], &mut LayerScratch::default())?[0];
    let w = insurer.market_share;
    Ok(CatPremiumMoments {
        gross_mean: w * gross.mean,
        gross_var: w * w * gross.var,
        layer_mean: layer.mean,
        layer_var: layer.var,
    })
}
