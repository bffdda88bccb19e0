//! Insurer and market surplus, initial-capital calibration and risk measures.

use crate::error::{DfaError, Result};
use crate::stats::{quantile_sorted, sorted_copy};

/// Smallest number of one-year draws accepted for capital calibration.
pub const MIN_CALIBRATION_DRAWS: usize = 10_000;

/// Capital state of the market at the end of a year.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketState {
    pub year: i32,
    pub insurer_capital: Vec<f64>,
    pub reinsurer_capital: f64,
    pub reinsurer_solvency: f64,
}

impl MarketState {
    pub fn market_capital(&self) -> f64 {
        self.insurer_capital.iter().sum()
    }
}

/// End-of-year capital: premiums are invested with the capital, losses are
/// paid at year end.
pub fn step_insurer_surplus(prev_capital: f64, premium_net_of_ri: f64, investment_return: f64, net_losses: f64) -> f64 {
    (1.0 + investment_return) * (prev_capital + premium_net_of_ri) - net_losses
}

/// One simulated year used for capital calibration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneYearDraw {
    pub losses: f64,
    pub premium: f64,
    pub rate: f64,
}

impl OneYearDraw {
    /// Starting capital at which this draw ends the year with zero capital.
    pub fn breakeven_capital(&self) -> f64 {
        self.losses / (1.0 + self.rate) - self.premium
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialCapital {
    /// 99.5% quantile of the breakeven capital.
    pub base: f64,
    /// `target_ratio * base`, floored at zero.
    pub scaled: f64,
}

/// Calibrates starting capital so that one-year ruin has probability 0.5%,
/// then scales by the target capital ratio. `one_year` receives the draw
/// index and returns that draw.
pub fn calibrate_initial_capital<F>(mut one_year: F, n_calib: usize, target_ratio: f64) -> Result<InitialCapital>
where
    F: FnMut(usize) -> Result<OneYearDraw>,
{
    if n_calib < MIN_CALIBRATION_DRAWS {
        return Err(DfaError::TooShort {
            what: "capital calibration draws",
            needed: MIN_CALIBRATION_DRAWS,
            got: n_calib,
        });
    }
    let mut need = Vec::with_capacity(n_calib);
    for i in 0..n_calib {
        need.push(one_year(i)?.breakeven_capital());
    }
    Ok(capital_from_breakeven(&need, target_ratio))
}

/// Quantile step of [`calibrate_initial_capital`] on precomputed breakeven
/// capitals.
pub fn capital_from_breakeven(breakeven: &[f64], target_ratio: f64) -> InitialCapital {
    let base = quantile_sorted(&sorted_copy(breakeven), 0.995);
    InitialCapital {
        base,
        scaled: (target_ratio * base).max(0.0),
    }
}

/// Market capital and total claims of every path of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPaths {
    pub scenario_id: String,
    pub start_year: i32,
    /// `capital[path][t]` for year index t = 0..=T.
    pub capital: Vec<Vec<f64>>,
    /// `claims[path][t]`; index 0 is unused.
    pub claims: Vec<Vec<f64>>,
}

impl ScenarioPaths {
    pub fn n_paths(&self) -> usize {
        self.capital.len()
    }

    pub fn years(&self) -> usize {
        self.capital.first().map_or(0, |p| p.len().saturating_sub(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct YearMetrics {
    pub year: i32,
    pub expected_surplus: f64,
    pub median_surplus: f64,
    pub insolvency_probability: f64,
    /// Absent when no path is insolvent.
    pub deficit_given_insolvency: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub scenario_id: String,
    pub n_paths: usize,
    pub years: Vec<YearMetrics>,
    /// `(horizon, cagr)`; absent when a mean endpoint is not positive.
    pub cagr: Vec<(usize, Option<f64>)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RiskReport {
    pub scenarios: Vec<ScenarioReport>,
}

pub const METRICS: [&str; 4] = [
    "expected_surplus",
    "median_surplus",
    "insolvency_probability",
    "deficit_given_insolvency",
];

/// Mean of values summed in sorted order, so the result does not depend on
/// the order of the input.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn cagr(k0: f64, kt: f64, horizon: usize) -> Option<f64> {
    if k0 > 0.0 && kt > 0.0 && horizon > 0 {
        Some((kt / k0).powf(1.0 / horizon as f64) - 1.0)
    } else {
        None
    }
}

pub fn compute_risk_report(scenarios: &[ScenarioPaths], horizons: &[usize]) -> Result<RiskReport> {
    let mut out = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let n = sc.n_paths();
        if n == 0 {
            return Err(DfaError::Empty("scenario paths"));
        }
        let t_max = sc.years();
        for (p, path) in sc.capital.iter().enumerate() {
            if path.len() != t_max + 1 || sc.claims.get(p).map_or(true, |c| c.len() != t_max + 1) {
                return Err(DfaError::LengthMismatch {
                    what: "path horizon",
                    left: path.len(),
                    right: t_max + 1,
                });
            }
        }
        if sc.claims.len() != n {
            return Err(DfaError::LengthMismatch {
                what: "claims paths",
                left: sc.claims.len(),
                right: n,
            });
        }
        let mut column = vec![0.0; n];
        let mut mean_path = Vec::with_capacity(t_max + 1);
        let mut years = Vec::with_capacity(t_max);
        for t in 0..=t_max {
            for (c, path) in column.iter_mut().zip(&sc.capital) {
                *c = path[t];
            }
            let mut deficits: Vec<f64> = sc
                .capital
                .iter()
                .zip(&sc.claims)
                .filter(|(k, l)| k[t] <= 0.0 && l[t] > 0.0)
                .map(|(k, l)| -k[t] / l[t])
                .collect();
            let insolvent = column.iter().filter(|k| **k <= 0.0).count();
            let expected = order_free_mean(&mut column);
            mean_path.push(expected);
            if t == 0 {
                continue;
            }
            years.push(YearMetrics {
                year: sc.start_year + t as i32,
                expected_surplus: expected,
                median_surplus: quantile_sorted(&column, 0.5),
                insolvency_probability: insolvent as f64 / n as f64,
                deficit_given_insolvency: if deficits.is_empty() {
                    None
                } else {
                    Some(order_free_mean(&mut deficits))
                },
            });
        }
        let cagr = horizons
            .iter()
            .filter(|&&h| h >= 1 && h <= t_max)
            .map(|&h| (h, cagr(mean_path[0], mean_path[h], h)))
            .collect();
        out.push(ScenarioReport {
            scenario_id: sc.scenario_id.clone(),
            n_paths: n,
            years,
            cagr,
        });
    }
    Ok(RiskReport { scenarios: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    #[test]
    fn surplus_step_examples() {
        assert_eq!(step_insurer_surplus(100.0, 50.0, 0.0, 30.0), 120.0);
        assert!((step_insurer_surplus(100.0, 50.0, 0.1, 30.0) - 135.0).abs() < 1e-12);
        assert_eq!(step_insurer_surplus(42.0, 0.0, 0.0, 0.0), 42.0);
    }

    #[test]
    fn constant_draws_give_scaled_constant() {
        let c = step_draw(250.0, 0.05, 100.0);
        let k = calibrate_initial_capital(|_| Ok(c), 10_000, 1.75).unwrap();
        assert!((k.base - c.breakeven_capital()).abs() < 1e-12);
        assert!((k.scaled - 1.75 * c.breakeven_capital()).abs() < 1e-9);
    }

    fn step_draw(losses: f64, rate: f64, premium: f64) -> OneYearDraw {
        OneYearDraw { losses, premium, rate }
    }

    #[test]
    fn no_losses_floor_at_zero() {
        let k = calibrate_initial_capital(|_| Ok(step_draw(0.0, 0.02, 10.0)), 10_000, 1.75).unwrap();
        assert!(k.base <= 0.0);
        assert_eq!(k.scaled, 0.0);
    }

    #[test]
    fn too_few_draws_rejected() {
        assert!(calibrate_initial_capital(|_| Ok(step_draw(1.0, 0.0, 0.0)), 9_999, 1.0).is_err());
    }

    #[test]
    fn simulator_errors_propagate() {
        let r = calibrate_initial_capital(|i| if i == 5 { Err(DfaError::Empty("x")) } else { Ok(step_draw(1.0, 0.0, 0.0)) }, 10_000, 1.0);
        assert!(r.is_err());
    }

    fn scenario(capital: Vec<Vec<f64>>, claims: Vec<Vec<f64>>) -> ScenarioPaths {
        ScenarioPaths {
            scenario_id: "s".into(),
            start_year: 2025,
            capital,
            claims,
        }
    }

    #[test]
    fn report_examples() {
        let cap = vec![vec![100.0, -10.0], vec![100.0, 20.0], vec![100.0, 30.0], vec![100.0, 40.0]];
        let cl = vec![vec![0.0, 100.0]; 4];
        let r = compute_risk_report(&[scenario(cap, cl)], &[]).unwrap();
        let y = &r.scenarios[0].years[0];
        assert_eq!(y.year, 2026);
        assert_eq!(y.insolvency_probability, 0.25);
        assert_eq!(y.median_surplus, 25.0);
        assert_eq!(y.expected_surplus, 20.0);
        assert!((y.deficit_given_insolvency.unwrap() - 0.1).abs() < 1e-15);

        let r = compute_risk_report(&[scenario(vec![vec![1.0, 2.0]], vec![vec![0.0, 1.0]])], &[]).unwrap();
        assert_eq!(r.scenarios[0].years[0].insolvency_probability, 0.0);
        assert_eq!(r.scenarios[0].years[0].deficit_given_insolvency, None);

        let r = compute_risk_report(&[scenario(vec![vec![100.0, -50.0]], vec![vec![0.0, 500.0]])], &[]).unwrap();
        assert!((r.scenarios[0].years[0].deficit_given_insolvency.unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cagr_examples() {
        let mut path = vec![100.0; 11];
        path[10] = 200.0;
        let r = compute_risk_report(&[scenario(vec![path], vec![vec![1.0; 11]])], &[10, 20]).unwrap();
        assert_eq!(r.scenarios[0].cagr.len(), 1);
        let (h, g) = r.scenarios[0].cagr[0];
        assert_eq!(h, 10);
        assert!((g.unwrap() - 0.07177).abs() < 1e-5);
        assert_eq!(cagr(100.0, -5.0, 3), None);
    }

    #[test]
    fn zero_capital_counts_as_insolvent() {
        let r = compute_risk_report(&[scenario(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![vec![0.0, 5.0]; 2])], &[]).unwrap();
        assert_eq!(r.scenarios[0].years[0].insolvency_probability, 0.5);
        assert_eq!(r.scenarios[0].years[0].deficit_given_insolvency, Some(0.0));
    }

    #[test]
    fn deterministic_annuity_path() {
        let (k0, pi, r) = (100.0, 7.0, 0.03);
        let mut k = k0;
        for t in 1..=40 {
            k = step_insurer_surplus(k, pi, r, 0.0);
            let closed = (1.0f64 + r).powi(t) * k0 + pi * (1..=t).map(|s| (1.0f64 + r).powi(t - s + 1)).sum::<f64>();
            assert!((k / closed - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn calibrated_capital_hits_ruin_target() {
        use crate::hazard::{sample_period_losses, EventParams};
        let periods = [EventParams { rate: 2.0, log_location: 0.0 }];
        let premium = 4.0;
        let rate = 0.03;
        let mut rng = rng_from_seed(21);
        let mut buf = Vec::new();
        let mut draw = |_: usize| {
            buf.clear();
            sample_period_losses(&periods, 1.0, &mut rng, &mut buf);
            Ok(step_draw(buf.iter().sum(), rate, premium))
        };
        let k = calibrate_initial_capital(&mut draw, 100_000, 1.0).unwrap();
        let mut check = rng_from_seed(22);
        let n = 200_000;
        let mut ruined = 0;
        for _ in 0..n {
            buf.clear();
            sample_period_losses(&periods, 1.0, &mut check, &mut buf);
            if step_insurer_surplus(k.base, premium, rate, buf.iter().sum()) <= 0.0 {
                ruined += 1;
            }
        }
        let p = ruined as f64 / n as f64;
        assert!((0.004..=0.006).contains(&p), "ruin probability {p}");
    }

    proptest! {
        #[test]
        fn report_ignores_path_order(seed in 0u64..1000, n in 1usize..40) {
            let mut rng = rng_from_seed(seed);
            let cap: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rand::Rng::random_range(&mut rng, -50.0..150.0)).collect()).collect();
            let cl: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rand::Rng::random_range(&mut rng, 1.0..100.0)).collect()).collect();
            let a = compute_risk_report(&[scenario(cap.clone(), cl.clone())], &[1, 3, 5]).unwrap();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let cap2 = idx.iter().map(|&i| cap[i].clone()).collect();
            let cl2 = idx.iter().map(|&i| cl[i].clone()).collect();
            let b = compute_risk_report(&[scenario(cap2, cl2)], &[1, 3, 5]).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn insolvency_non_increasing_in_initial_capital(seed in 0u64..1000, extra in 0.0f64..100.0) {
            let mut rng = rng_from_seed(seed);
            let shocks: Vec<f64> = (0..200).map(|_| rand::Rng::random_range(&mut rng, 0.0..300.0)).collect();
            let run = |k0: f64| {
                let cap: Vec<Vec<f64>> = shocks.iter().map(|&l| vec![k0, step_insurer_surplus(k0, 50.0, 0.02, l)]).collect();
                let cl = vec![vec![0.0, 1.0]; cap.len()];
                compute_risk_report(&[scenario(cap, cl)], &[]).unwrap().scenarios[0].years[0].insolvency_probability
            };
            prop_assert!(run(100.0 + extra) <= run(100.0));
        }

        #[test]
        fn probabilities_are_bounded(vals in proptest::collection::vec(-100.0f64..100.0, 1..50)) {
            let cap: Vec<Vec<f64>> = vals.iter().map(|&v| vec![1.0, v]).collect();
            let cl = vec![vec![0.0, 10.0]; cap.len()];
            let r = compute_risk_report(&[scenario(cap, cl)], &[]).unwrap();
            let y = &r.scenarios[0].years[0];
            prop_assert!((0.0..=1.0).contains(&y.insolvency_probability));
            if let Some(d) = y.deficit_given_insolvency {
                prop_assert!(d >= 0.0);
            }
        }
    }
}
