//! Damage-linked equity returns and the insurer investment return.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DfaError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EquityParams {
    pub op_intercept: f64,
    pub op_sensitivity: f64,
    pub op_sigma: f64,
    pub x_intercept: f64,
    pub x_sensitivity: f64,
    pub x_sigma: f64,
    pub brown_sensitivity: f64,
}

impl EquityParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.op_intercept,
            self.op_sensitivity,
            self.op_sigma,
            self.x_intercept,
            self.x_sensitivity,
            self.x_sigma,
            self.brown_sensitivity,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(DfaError::Config("equity parameters must be finite".into()));
        }
        if self.op_sigma < 0.0 || self.x_sigma < 0.0 {
            return Err(DfaError::Config("equity sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioParams {
    pub risk_free_weight: f64,
    pub brown_weight: f64,
}

impl PortfolioParams {
    pub fn validate(&self) -> Result<()> {
        let wf = self.risk_free_weight;
        let wb = self.brown_weight;
        if !(0.0..=1.0).contains(&wf) || !(0.0..=1.0 - wf).contains(&wb) {
            return Err(DfaError::Config(format!(
                "portfolio weights need 0 <= w_f <= 1 and 0 <= w_B <= 1 - w_f (got w_f={wf}, w_B={wb})"
            )));
        }
        Ok(())
    }
}

/// Consumption left after uninsured catastrophe damage. A non-positive value
/// is returned as is; callers record it as an economic wipeout.
pub fn consumption_after_damage(gdp: f64, uninsured_ratio: f64, market_cat_loss: f64) -> f64 {
    gdp - uninsured_ratio * market_cat_loss
}

/// Standard-normal shocks of one year's equity draw.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EquityShocks {
    pub op: f64,
    pub x: f64,
}

impl EquityShocks {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        EquityShocks {
            op: rng.sample(StandardNormal),
            x: rng.sample(StandardNormal),
        }
    }
}

/// General and brown sector returns for given shocks. Both sectors share the
/// operating-profit and excess-return shocks.
pub fn sector_returns(
    nominal_rate: f64,
    consumption_growth: f64,
    brown_production_growth: f64,
    params: &EquityParams,
    shocks: EquityShocks,
) -> (f64, f64) {
    let d_op = params.op_intercept + params.op_sensitivity * consumption_growth + params.op_sigma * shocks.op;
    let d_op_brown = d_op + params.brown_sensitivity * brown_production_growth;
    let x = params.x_intercept + params.x_sensitivity * d_op + params.x_sigma * shocks.x;
    let x_brown = params.x_intercept + params.x_sensitivity * d_op_brown + params.x_sigma * shocks.x;
    (nominal_rate + x, nominal_rate + x_brown)
}

pub fn simulate_sector_returns<R: Rng + ?Sized>(
    nominal_rate: f64,
    consumption_growth: f64,
    brown_production_growth: f64,
    params: &EquityParams,
    rng: &mut R,
) -> (f64, f64) {
    let shocks = EquityShocks::draw(rng);
    sector_returns(nominal_rate, consumption_growth, brown_production_growth, params, shocks)
}

pub fn portfolio_return(nominal_rate: f64, general_return: f64, brown_return: f64, params: &PortfolioParams) -> f64 {
    let wf = params.risk_free_weight;
    let wb = params.brown_weight;
    wf * nominal_rate + (1.0 - wf - wb) * general_return + wb * brown_return
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn reference_equity(sigmas: bool) -> EquityParams {
        EquityParams {
            op_intercept: 0.0,
            op_sensitivity: 3.824,
            op_sigma: if sigmas { 0.083 } else { 0.0 },
            x_intercept: 0.0,
            x_sensitivity: 0.047,
            x_sigma: if sigmas { 0.103 } else { 0.0 },
            brown_sensitivity: 1.768,
        }
    }

    #[test]
    fn consumption_examples() {
        assert!((consumption_after_damage(1000.0, 1.22, 10.0) - 987.8).abs() < 1e-12);
        assert_eq!(consumption_after_damage(1000.0, 0.0, 500.0), 1000.0);
        assert_eq!(consumption_after_damage(1000.0, 1.22, 0.0), 1000.0);
    }

    #[test]
    fn sector_return_examples() {
        let p = reference_equity(false);
        let (g, _) = sector_returns(0.03, 0.03, 0.0, &p, EquityShocks::default());
        let d_op = 3.824 * 0.03;
        assert!((d_op - 0.11472f64).abs() < 1e-15);
        assert!((g - (0.03 + 0.047 * d_op)).abs() < 1e-15);
        assert!((g - 0.03 - 0.005392).abs() < 1e-6);

        // brown operating profit change when general change is 0.05
        let mut q = reference_equity(false);
        q.op_sensitivity = 1.0;
        let (g, b) = sector_returns(0.0, 0.05, -0.10, &q, EquityShocks::default());
        assert!((g - 0.047 * 0.05).abs() < 1e-15);
        assert!((b - 0.047 * (0.05 - 0.1768)).abs() < 1e-15);

        let (g, b) = sector_returns(0.04, 0.0, 0.0, &p, EquityShocks::default());
        assert_eq!((g, b), (0.04, 0.04));
    }

    #[test]
    fn portfolio_examples() {
        let w = PortfolioParams {
            risk_free_weight: 0.6,
            brown_weight: 0.03,
        };
        assert!((portfolio_return(0.04, 0.08, 0.02, &w) - 0.0542).abs() < 1e-15);
        assert!((portfolio_return(0.05, 0.05, 0.05, &w) - 0.05).abs() < 1e-15);
        let all_rf = PortfolioParams {
            risk_free_weight: 1.0,
            brown_weight: 0.0,
        };
        assert_eq!(portfolio_return(0.03, 0.9, -0.5, &all_rf), 0.03);
    }

    #[test]
    fn weights_are_validated() {
        assert!(PortfolioParams { risk_free_weight: 0.6, brown_weight: 0.41 }.validate().is_err());
        assert!(PortfolioParams { risk_free_weight: 1.1, brown_weight: 0.0 }.validate().is_err());
        assert!(PortfolioParams { risk_free_weight: 0.6, brown_weight: 0.4 }.validate().is_ok());
    }

    #[test]
    fn general_return_is_affine_in_consumption_growth() {
        let p = reference_equity(false);
        let slope = p.x_sensitivity * p.op_sensitivity;
        let r = |c: f64| sector_returns(0.02, c, 0.0, &p, EquityShocks::default()).0;
        for c in [-0.05, 0.01, 0.07] {
            assert!((r(c) - r(0.0) - slope * c).abs() < 1e-15);
        }
    }

    #[test]
    fn simulated_returns_have_expected_spread() {
        let p = reference_equity(true);
        let mut rng = rng_from_seed(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| simulate_sector_returns(0.0, 0.0, 0.0, &p, &mut rng).0).collect();
        let target = (p.x_sensitivity * p.op_sigma).powi(2) + p.x_sigma.powi(2);
        let var = crate::stats::sample_variance(&xs);
        assert!((var / target - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    proptest! {
        #[test]
        fn portfolio_is_convex(
            r in -0.5f64..0.5, g in -0.5f64..0.5, b in -0.5f64..0.5,
            wf in 0.0f64..=1.0, frac in 0.0f64..=1.0,
        ) {
            let w = PortfolioParams { risk_free_weight: wf, brown_weight: frac * (1.0 - wf) };
            let out = portfolio_return(r, g, b, &w);
            let lo = r.min(g).min(b);
            let hi = r.max(g).max(b);
            prop_assert!(out >= lo - 1e-12 && out <= hi + 1e-12);
        }

        #[test]
        fn brown_gap_is_exact(
            c in -0.1f64..0.1, yb in -0.3f64..0.3, zo in -3.0f64..3.0, zx in -3.0f64..3.0, r in -0.02f64..0.1,
        ) {
            let p = reference_equity(true);
            let (g, b) = sector_returns(r, c, yb, &p, EquityShocks { op: zo, x: zx });
            let gap = p.x_sensitivity * p.brown_sensitivity * yb;
            prop_assert!(((b - g) - gap).abs() < 1e-12);
        }
    }
}
