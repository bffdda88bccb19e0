//! Batch calibration from CSV files, driven by the `[[calibration]]` jobs of
//! a run configuration.

use std::path::Path;

use crate::calibration::{
    default_quantile_grid, fit_affine_quantile_map, fit_ar1, fit_lognormal_location, fit_ols, fit_poisson_glm,
    fit_residual_sigma, fit_tweedie_dispersion, Column, FitResult,
};
use crate::error::{DfaError, Result};

use super::config::{CalibrationJob, CalibrationKind};
use super::data::Table;

pub const FITS: &str = "fits.csv";

/// One output row: `model,parameter,estimate,std_err,aic,bic,n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitRow {
    pub model: String,
    pub parameter: String,
    pub estimate: f64,
    pub std_err: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub n: usize,
}

fn rows_of_fit(model: &str, fit: &FitResult) -> Vec<FitRow> {
    fit.coefficients
        .iter()
        .map(|(name, est)| FitRow {
            model: model.to_string(),
            parameter: name.clone(),
            estimate: *est,
            std_err: fit.standard_error(name),
            aic: Some(fit.aic),
            bic: Some(fit.bic),
            n: fit.n_obs,
        })
        .collect()
}

fn plain(model: &str, parameter: &str, estimate: f64, n: usize) -> FitRow {
    FitRow {
        model: model.to_string(),
        parameter: parameter.to_string(),
        estimate,
        std_err: None,
        aic: None,
        bic: None,
        n,
    }
}

/// Runs one job with files resolved against `data_dir`.
pub fn run_job(job: &CalibrationJob, data_dir: &Path) -> Result<Vec<FitRow>> {
    let table = Table::read(&data_dir.join(&job.file))?;
    let response = |default: &str| -> Result<Vec<f64>> { table.numeric_column(job.response.as_deref().unwrap_or(default)) };
    let covariates = || -> Result<Vec<Column>> {
        job.covariates
            .iter()
            .map(|c| Ok(Column::new(c.clone(), table.numeric_column(c)?)))
            .collect()
    };
    let model = job.model.as_str();
    match job.kind {
        CalibrationKind::QuantileMap => {
            let backcast_file = job
                .backcast_file
                .as_ref()
                .ok_or_else(|| DfaError::Config(format!("calibration `{model}`: quantile_map needs backcast_file")))?;
            let historical = response("value")?;
            let backcast = Table::read(&data_dir.join(backcast_file))?.numeric_column(job.response.as_deref().unwrap_or("value"))?;
            let (b0, b1) = fit_affine_quantile_map(&historical, &backcast, &default_quantile_grid())?;
            let mut rows = vec![
                plain(model, "bias_intercept", b0, historical.len()),
                plain(model, "bias_slope", b1, historical.len()),
            ];
            // residual noise needs the two series aligned period by period
            if historical.len() == backcast.len() {
                let corrected: Vec<f64> = backcast.iter().map(|b| b0 + b1 * b).collect();
                rows.push(plain(model, "noise_sigma", fit_residual_sigma(&historical, &corrected)?, historical.len()));
            }
            Ok(rows)
        }
        CalibrationKind::PoissonGlm => {
            let counts = response("count")?;
            let offset = job.offset.as_deref().map(|c| table.numeric_column(c)).transpose()?;
            let fit = fit_poisson_glm(&counts, &covariates()?, offset.as_deref())?;
            let mut rows = rows_of_fit(model, &fit);
            if fit.separation {
                rows.push(plain(model, "separation", 1.0, fit.n_obs));
            }
            Ok(rows)
        }
        CalibrationKind::LognormalLocation => Ok(rows_of_fit(model, &fit_lognormal_location(&response("value")?, &covariates()?)?)),
        CalibrationKind::Ols => Ok(rows_of_fit(model, &fit_ols(&response("value")?, &covariates()?)?)),
        CalibrationKind::Ar1 => {
            let fit = fit_ar1(&response("value")?)?;
            let mut rows = rows_of_fit(model, &fit.fit);
            if fit.non_stationary {
                rows.push(plain(model, "non_stationary", 1.0, fit.fit.n_obs));
            }
            Ok(rows)
        }
        CalibrationKind::TweedieDispersion => {
            let losses = response("value")?;
            let mu = match job.mu {
                Some(mu) => mu,
                None if !losses.is_empty() => losses.iter().sum::<f64>() / losses.len() as f64,
                None => return Err(DfaError::Empty("Tweedie losses")),
            };
            let power = job.power.unwrap_or(1.5);
            let phi = fit_tweedie_dispersion(&losses, mu, power)?;
            Ok(vec![
                plain(model, "mu", mu, losses.len()),
                plain(model, "power", power, losses.len()),
                plain(model, "dispersion", phi, losses.len()),
            ])
        }
    }
}

/// Runs every job and writes `fits.csv` to `out_dir`.
pub fn run_calibration(jobs: &[CalibrationJob], data_dir: &Path, out_dir: &Path) -> Result<Vec<FitRow>> {
    let mut rows = Vec::new();
    for job in jobs {
        rows.extend(run_job(job, data_dir)?);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| DfaError::io(out_dir, e))?;
    let path = out_dir.join(FITS);
    let mut w = csv::Writer::from_path(&path).map_err(|e| DfaError::csv(&path, e))?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v}"));
    w.write_record(["model", "parameter", "estimate", "std_err", "aic", "bic", "n"])
        .map_err(|e| DfaError::csv(&path, e))?;
    for r in &rows {
        w.write_record([
            r.model.as_str(),
            &r.parameter,
            &format!("{}", r.estimate),
            &opt(r.std_err),
            &opt(r.aic),
            &opt(r.bic),
            &r.n.to_string(),
        ])
        .map_err(|e| DfaError::csv(&path, e))?;
    }
    w.flush().map_err(|e| DfaError::io(&path, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn job(kind: CalibrationKind, file: &str) -> CalibrationJob {
        CalibrationJob {
            model: "m".into(),
            kind,
            file: PathBuf::from(file),
            response: None,
            covariates: vec![],
            offset: None,
            backcast_file: None,
            mu: None,
            power: None,
        }
    }

    #[test]
    fn ols_and_quantile_jobs() {
        let d = tempfile::tempdir().unwrap();
        let mut body = String::from("period,value,x\n");
        let mut back = String::from("period,value\n");
        for i in 0..50 {
            let x = i as f64 * 0.37;
            body.push_str(&format!("{},{},{}\n", 2000 + i, 1.0 + 2.0 * x, x));
            back.push_str(&format!("{},{}\n", 2000 + i, x));
        }
        std::fs::write(d.path().join("h.csv"), body).unwrap();
        std::fs::write(d.path().join("b.csv"), back).unwrap();

        let mut ols = job(CalibrationKind::Ols, "h.csv");
        ols.covariates = vec!["x".into()];
        let rows = run_job(&ols, d.path()).unwrap();
        let slope = rows.iter().find(|r| r.parameter == "x").unwrap();
        assert!((slope.estimate - 2.0).abs() < 1e-10);

        let mut qm = job(CalibrationKind::QuantileMap, "h.csv");
        qm.backcast_file = Some("b.csv".into());
        let rows = run_calibration(&[qm], d.path(), &d.path().join("out")).unwrap();
        assert!((rows[0].estimate - 1.0).abs() < 1e-10);
        assert!((rows[1].estimate - 2.0).abs() < 1e-10);
        assert!(rows[2].estimate.abs() < 1e-9);
        let text = std::fs::read_to_string(d.path().join("out").join(FITS)).unwrap();
        assert!(text.starts_with("model,parameter,estimate,std_err,aic,bic,n\n"));
    }

    #[test]
    fn missing_column_is_a_parse_error() {
        let d = tempfile::tempdir().unwrap();
        std::fs::write(d.path().join("c.csv"), "period,count\n2000,1\n2001,2\n").unwrap();
        let mut glm = job(CalibrationKind::PoissonGlm, "c.csv");
        glm.covariates = vec!["sst".into()];
        assert!(matches!(run_job(&glm, d.path()), Err(DfaError::Parse { .. })));
    }
}
