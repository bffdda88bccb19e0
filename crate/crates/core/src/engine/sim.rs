//! Simulation orchestrator: scenario setup, initial-capital calibration and
//! the per-path annual cascade.
//!
//! Within a year the modules run in dependency order: climate, hazards,
//! macro-economy, assets, liabilities and premiums, reinsurer capital and
//! finally insurer surplus. Every path draws from generators seeded only by
//! (master seed, scenario index, path index), and results are collected in
//! path order, so the output does not depend on the number of workers.

use std::path::Path;

use rayon::prelude::*;

use crate::assets::{consumption_after_damage, portfolio_return, simulate_sector_returns, EquityParams, PortfolioParams};
use crate::climate::ClimateVar;
use crate::error::{DfaError, Result};
use crate::hazard::{period_params, sample_period_losses, EventParams, HazardModel};
use crate::liability::{
    gross_premium, market_gross_moments, net_cat_loss, noncat_moments, reinsurance_premium, scaled_noncat_loss,
    simulate_noncat_loss, step_reinsurer_capital, InsurerSpec, LayerBank, LayerScratch, LayerTerms, Moments, NonCatParams,
    ReinsuranceMarketParams,
};
use crate::macro_econ::{EconPath, InflationParams, MacroInputs, RateParams};
use crate::rng::{derive_path_seed, scenario_seed, substream, substream_seed, tags};
use crate::surplus::{capital_from_breakeven, compute_risk_report, step_insurer_surplus, OneYearDraw, RiskReport, ScenarioPaths};

use super::config::{PremiumTiming, RunConfig};
use super::scenario::ScenarioData;

/// Command-line overrides of the run section.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub n_paths: Option<usize>,
    pub master_seed: Option<u64>,
    /// Run only this scenario.
    pub scenario: Option<String>,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
}

/// How an insurer's starting capital was set.
#[derive(Clone, Debug, PartialEq)]
pub struct InsurerCapital {
    pub insurer_id: String,
    /// 99.5% breakeven quantile; absent when the capital was configured.
    pub base: Option<f64>,
    pub initial_capital: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioCapital {
    pub scenario_id: String,
    pub insurers: Vec<InsurerCapital>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Configuration after applying the run options.
    pub config: RunConfig,
    pub paths: Vec<ScenarioPaths>,
    pub report: RiskReport,
    pub capital: Vec<ScenarioCapital>,
}

/// Parameter blocks shared by every path of a run.
struct Params {
    inflation: InflationParams,
    rates: RateParams,
    equity: EquityParams,
    portfolio: PortfolioParams,
    noncat: Option<NonCatParams>,
    reinsurance: ReinsuranceMarketParams,
    insurers: Vec<InsurerSpec>,
    uninsured_ratio: f64,
    timing: PremiumTiming,
    initial_inflation: f64,
    overlay_active: bool,
}

/// Immutable per-scenario state shared by every path.
struct ScenarioContext<'a> {
    /// Position of the scenario in the configured list; keys its random streams.
    stream: u64,
    params: &'a Params,
    data: ScenarioData,
    models: Vec<HazardModel>,
    bank: LayerBank,
    /// Distinct reinsurance layers, priced once per year.
    layers: Vec<LayerTerms>,
    /// Index into `layers` of each insurer's cover.
    layer_of: Vec<usize>,
}

/// Result of one simulated path.
#[derive(Clone, Debug, Default)]
pub struct PathRecord {
    /// Market capital for year index 0..=years.
    pub market_capital: Vec<f64>,
    /// Claims paid by insurers (net catastrophe plus other losses); index 0 is
    /// zero.
    pub claims: Vec<f64>,
    /// Year-1 outcome of every insurer, used for capital calibration.
    pub first_year: Vec<OneYearDraw>,
}

struct PathError {
    year: i32,
    source: DfaError,
}

impl<'a> ScenarioContext<'a> {
    fn new(config: &RunConfig, params: &'a Params, data: ScenarioData, scenario_index: usize, master: u64) -> Result<Self> {
        let models = config.hazard_models()?;
        let stream = scenario_index as u64;
        let bank_seed = substream_seed(scenario_seed(master, stream), tags::LAYER_BANK);
        let bank = LayerBank::new(&models, config.run.inner_samples, bank_seed)?;
        let mut layers: Vec<LayerTerms> = Vec::new();
        let mut layer_of = Vec::with_capacity(params.insurers.len());
        for ins in &params.insurers {
            let terms = LayerTerms::from(ins);
            let idx = match layers.iter().position(|l| *l == terms) {
                Some(i) => i,
                None => {
                    layers.push(terms);
                    layers.len() - 1
                }
            };
            layer_of.push(idx);
        }
        Ok(ScenarioContext {
            stream,
            params,
            data,
            models,
            bank,
            layers,
            layer_of,
        })
    }

    /// Simulates years 1..=`years` of the path seeded by `seed` from starting
    /// capitals `k0`.
    fn simulate(&self, seed: u64, years: usize, k0: &[f64]) -> std::result::Result<PathRecord, PathError> {
        let p = self.params;
        let d = &self.data;
        let start = d.start_year;
        let at = |year: usize| move |source: DfaError| PathError {
            year: start + year as i32,
            source,
        };

        let traj = d.ensemble.simulate_path_prefix(seed, years + 1).map_err(at(0))?;
        let temps = if p.overlay_active {
            Some(traj.series(ClimateVar::NearSurfaceTemp).ok_or(DfaError::MissingVariable {
                member: d.ensemble.members()[traj.member].model_id.clone(),
                variable: ClimateVar::NearSurfaceTemp.name().into(),
            }))
            .transpose()
            .map_err(at(0))?
        } else {
            None
        };
        let econ = EconPath::simulate(
            years,
            &p.inflation,
            &p.rates,
            &MacroInputs {
                potential_growth: &d.potential_growth,
                monthly_temps: temps,
                initial_inflation: p.initial_inflation,
                initial_resid: p.rates.resid_mean,
            },
            &mut substream(seed, tags::INFLATION),
            &mut substream(seed, tags::REAL_RATE),
        )
        .map_err(at(1))?;

        let mut hazard_rngs: Vec<_> = (0..self.models.len())
            .map(|h| substream(seed, tags::HAZARD + h as u64))
            .collect();
        let mut equity_rng = substream(seed, tags::EQUITY);
        let mut noncat_rng = substream(seed, tags::NONCAT);
        let mut scratch = LayerScratch::default();
        let mut events = Vec::new();

        let n_ins = p.insurers.len();
        let mut capital = k0.to_vec();
        let mut ri_capital = p.reinsurance.initial_reinsurer_capital;
        let mut ri_solvency = p.reinsurance.reference_solvency;
        let mut consumption_prev = d.gdp[0];

        let mut record = PathRecord {
            market_capital: Vec::with_capacity(years + 1),
            claims: Vec::with_capacity(years + 1),
            first_year: Vec::new(),
        };
        record.market_capital.push(capital.iter().sum());
        record.claims.push(0.0);

        for t in 1..=years {
            let fail = at(t);
            // hazards
            let periods: Vec<Vec<EventParams>> = self
                .models
                .iter()
                .map(|m| period_params(m, &traj, t))
                .collect::<Result<_>>()
                .map_err(&fail)?;
            let mut x_norm = 0.0;
            for ((m, per), rng) in self.models.iter().zip(&periods).zip(hazard_rngs.iter_mut()) {
                events.clear();
                sample_period_losses(per, m.sev_sigma, rng, &mut events);
                x_norm += events.iter().sum::<f64>();
            }

            // macro-economy and indexation
            let cpi = econ.cpi_index[t];
            let gdp_ratio = d.gdp[t] / d.gdp[0];
            let index = cpi * gdp_ratio;
            let x_nominal = index * x_norm;

            // assets: consumption in real terms, after uninsured damage
            let consumption = consumption_after_damage(d.gdp[t], p.uninsured_ratio, x_nominal / cpi);
            let consumption_growth = if consumption_prev > 0.0 {
                consumption / consumption_prev - 1.0
            } else {
                0.0
            };
            consumption_prev = consumption;
            let brown_growth = d.brown_production[t] / d.brown_production[t - 1] - 1.0;
            let nominal = econ.nominal_rate[t];
            let (general, brown) = simulate_sector_returns(nominal, consumption_growth, brown_growth, &p.equity, &mut equity_rng);
            let r = portfolio_return(nominal, general, brown, &p.portfolio);

            // premiums
            let priced = match p.timing {
                PremiumTiming::Current => None,
                PremiumTiming::Prior => Some(
                    self.models
                        .iter()
                        .map(|m| period_params(m, &traj, t - 1))
                        .collect::<Result<Vec<_>>>()
                        .map_err(&fail)?,
                ),
            };
            let pricing = priced.as_deref().unwrap_or(&periods);
            let gross = market_gross_moments(&self.models, pricing);
            let layer_moments: Vec<Moments> = self
                .bank
                .layer_moments(pricing, &self.layers, &mut scratch)
                .map_err(&fail)?
                .into_iter()
                .map(|m| m.scaled(index))
                .collect();

            let noncat_unit = p.noncat.as_ref().map(|nc| simulate_noncat_loss(nc, &mut noncat_rng));
            let population = d.population[t];

            let mut ri_premiums = 0.0;
            let mut recoveries = 0.0;
            let mut claims = 0.0;
            for (j, ins) in p.insurers.iter().enumerate() {
                let w = ins.market_share;
                let (nc_loss, nc_mean, nc_var) = match (&p.noncat, noncat_unit) {
                    (Some(nc), Some(unit)) => {
                        let loss = scaled_noncat_loss(unit, population, nc, w, cpi).map_err(&fail)?;
                        let (m, v) = noncat_moments(nc, population, w, cpi).map_err(&fail)?;
                        (loss, m, v)
                    }
                    _ => (0.0, 0.0, 0.0),
                };
                let cat = gross.scaled(w * index);
                let premium = gross_premium(cat.mean, cat.var, nc_mean, nc_var, self.loading());
                let lm = layer_moments[self.layer_of[j]];
                let ri_premium = reinsurance_premium(lm.mean, lm.var, self.loading(), ri_solvency, &p.reinsurance);
                let (net, rec) = net_cat_loss(x_nominal, ins, index * ins.xol_excess, index * ins.xol_limit);
                let losses = net + nc_loss;
                if t == 1 {
                    record.first_year.push(OneYearDraw {
                        losses,
                        premium: premium - ri_premium,
                        rate: r,
                    });
                }
                capital[j] = step_insurer_surplus(capital[j], premium - ri_premium, r, losses);
                ri_premiums += ri_premium;
                recoveries += rec;
                claims += losses;
            }
            debug_assert_eq!(capital.len(), n_ins);

            // reinsurer: with no premium written the solvency ratio keeps its
            // previous value
            if ri_premiums > 0.0 {
                let (k, s) = step_reinsurer_capital(ri_capital, ri_premiums, recoveries, r).map_err(&fail)?;
                ri_capital = k;
                ri_solvency = s;
            } else {
                ri_capital = (1.0 + r) * ri_capital - recoveries;
            }

            let market: f64 = capital.iter().sum();
            if !market.is_finite() {
                return Err(fail(DfaError::NonFinite("market capital")));
            }
            record.market_capital.push(market);
            record.claims.push(claims);
        }
        Ok(record)
    }

    fn loading(&self) -> f64 {
        self.params.reinsurance.risk_loading
    }
}

/// Runs every selected scenario of `config`. Relative data paths in the
/// configuration resolve against `base_dir`.
pub fn run_simulation(config: &RunConfig, options: &RunOptions, base_dir: &Path) -> Result<RunOutput> {
    let mut config = config.clone();
    if let Some(n) = options.n_paths {
        config.run.n_paths = n;
    }
    if let Some(seed) = options.master_seed {
        config.run.master_seed = seed;
    }
    // random streams follow a scenario's position in the full list, so a
    // single-scenario run reproduces that scenario of the full run
    let mut streams: Vec<usize> = (0..config.scenarios.len()).collect();
    if let Some(id) = &options.scenario {
        let pos = config
            .scenarios
            .iter()
            .position(|s| &s.id == id)
            .ok_or_else(|| DfaError::Config(format!("unknown scenario `{id}`")))?;
        config.scenarios = vec![config.scenarios[pos].clone()];
        streams = vec![pos];
    }
    config.validate()?;

    let params = params_of(&config)?;
    let mut contexts = Vec::with_capacity(config.scenarios.len());
    for (section, &stream) in config.scenarios.iter().zip(&streams) {
        let data = ScenarioData::build(&config, section, base_dir)?;
        contexts.push(ScenarioContext::new(&config, &params, data, stream, config.run.master_seed)?);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| DfaError::Config(format!("cannot start worker pool: {e}")))?;

    let master = config.run.master_seed;
    let years = config.horizon_years();
    let mut all_paths = Vec::with_capacity(contexts.len());
    let mut all_capital = Vec::with_capacity(contexts.len());
    for ctx in &contexts {
        let capital = pool.install(|| initial_capital(&config, ctx, master))?;
        let k0: Vec<f64> = capital.insurers.iter().map(|c| c.initial_capital).collect();

        let results: Vec<_> = pool.install(|| {
            (0..config.run.n_paths)
                .into_par_iter()
                .map(|i| ctx.simulate(derive_path_seed(master, ctx.stream, i as u64), years, &k0))
                .collect()
        });
        let mut capital_paths = Vec::with_capacity(results.len());
        let mut claim_paths = Vec::with_capacity(results.len());
        for (i, r) in results.into_iter().enumerate() {
            let rec = r.map_err(|e| path_failure(&ctx.data.scenario_id, i, e))?;
            capital_paths.push(rec.market_capital);
            claim_paths.push(rec.claims);
        }
        all_paths.push(ScenarioPaths {
            scenario_id: ctx.data.scenario_id.clone(),
            start_year: config.run.start_year,
            capital: capital_paths,
            claims: claim_paths,
        });
        all_capital.push(capital);
    }
    let report = compute_risk_report(&all_paths, &config.run.cagr_horizons)?;
    Ok(RunOutput {
        config,
        paths: all_paths,
        report,
        capital: all_capital,
    })
}

fn path_failure(scenario: &str, path: usize, e: PathError) -> DfaError {
    DfaError::PathFailure {
        scenario: scenario.to_string(),
        path,
        year: e.year,
        source: Box::new(e.source),
    }
}

/// Starting capital of every insurer: configured values are used as given,
/// the rest come from one-year calibration draws of this scenario.
fn initial_capital(config: &RunConfig, ctx: &ScenarioContext<'_>, master: u64) -> Result<ScenarioCapital> {
    let sections = &config.market.insurers;
    let mut out: Vec<InsurerCapital> = sections
        .iter()
        .map(|i| InsurerCapital {
            insurer_id: i.id.clone(),
            base: None,
            initial_capital: i.initial_capital.unwrap_or(0.0),
        })
        .collect();
    if sections.iter().any(|i| i.initial_capital.is_none()) {
        let n = config.run.n_calib;
        let calib_master = substream_seed(master, tags::CAPITAL_CALIBRATION);
        let zeros = vec![0.0; sections.len()];
        let draws: Vec<_> = (0..n)
            .into_par_iter()
            .map(|i| ctx.simulate(derive_path_seed(calib_master, ctx.stream, i as u64), 1, &zeros))
            .collect();
        let mut breakeven = vec![Vec::with_capacity(n); sections.len()];
        for (i, d) in draws.into_iter().enumerate() {
            let rec = d.map_err(|e| path_failure(&ctx.data.scenario_id, i, e))?;
            for (b, draw) in breakeven.iter_mut().zip(&rec.first_year) {
                b.push(draw.breakeven_capital());
            }
        }
        for ((slot, section), b) in out.iter_mut().zip(sections).zip(&breakeven) {
            if section.initial_capital.is_none() {
                let k = capital_from_breakeven(b, config.run.target_capital_ratio);
                slot.base = Some(k.base);
                slot.initial_capital = k.scaled;
            }
        }
    }
    Ok(ScenarioCapital {
        scenario_id: ctx.data.scenario_id.clone(),
        insurers: out,
    })
}

fn params_of(config: &RunConfig) -> Result<Params> {
    let inflation = config.inflation_params()?;
    Ok(Params {
        overlay_active: !inflation.overlay_is_inert(),
        initial_inflation: config.run.initial_inflation.unwrap_or(inflation.long_run_mean),
        inflation,
        rates: config.rate_params(),
        equity: config.equity_params(),
        portfolio: config.portfolio_params(),
        noncat: config.run.noncat_enabled.then(|| config.noncat_params()),
        reinsurance: config.reinsurance(),
        insurers: config.insurers(),
        uninsured_ratio: config.run.uninsured_ratio,
        timing: config.run.premium_timing,
    })
}
