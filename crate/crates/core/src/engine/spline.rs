//! Natural cubic spline interpolation of sparse (e.g. five-yearly) series.

use crate::error::{DfaError, Result};

#[derive(Clone, Debug)]
pub struct NaturalSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(knots: &[(i32, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(DfaError::TooShort {
                what: "spline knots",
                needed: 2,
                got: knots.len(),
            });
        }
        for w in knots.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DfaError::DuplicateKnot(w[0].0));
            }
            if w[1].0 < w[0].0 {
                return Err(DfaError::UnorderedKnots {
                    prev: w[0].0,
                    next: w[1].0,
                });
            }
        }
        if let Some(k) = knots.iter().find(|k| !k.1.is_finite()) {
            return Err(DfaError::Config(format!("non-finite knot value at year {}", k.0)));
        }
        let x: Vec<f64> = knots.iter().map(|k| k.0 as f64).collect();
        let y: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(NaturalSpline { x, y, m })
    }

    pub fn first_year(&self) -> i32 {
        self.x[0] as i32
    }

    pub fn last_year(&self) -> i32 {
        *self.x.last().expect("at least two knots") as i32
    }

    /// Spline value at `t`; outside the knot range the end cubic pieces are
    /// extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.iter().position(|&xi| xi > t) {
            Some(0) => 0,
            Some(j) => j - 1,
            None => n - 2,
        }
        .min(n - 2);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let h = x1 - x0;
        let a = x1 - t;
        let b = t - x0;
        m0 * a.powi(3) / (6.0 * h) + m1 * b.powi(3) / (6.0 * h) + (y0 / h - m0 * h / 6.0) * a + (y1 / h - m1 * h / 6.0) * b
    }
}

/// Spline values at every integer year from the first to the last knot.
pub fn interpolate_annual(knots: &[(i32, f64)]) -> Result<Vec<(i32, f64)>> {
    let s = NaturalSpline::new(knots)?;
    Ok((s.first_year()..=s.last_year()).map(|y| (y, s.eval(y as f64))).collect())
}

/// Spline values for `years` consecutive years from `start`, which must lie
/// inside the knot range.
pub fn annual_series(knots: &[(i32, f64)], start: i32, years: usize, what: &str) -> Result<Vec<f64>> {
    let s = NaturalSpline::new(knots)?;
    let end = start + years as i32 - 1;
    if start < s.first_year() || end > s.last_year() {
        return Err(DfaError::Config(format!(
            "{what} covers {}..{} but the run needs {start}..{end}",
            s.first_year(),
            s.last_year()
        )));
    }
    Ok((start..=end).map(|y| s.eval(y as f64)).collect())
}
