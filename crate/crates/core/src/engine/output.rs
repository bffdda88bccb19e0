//! Report files and the run manifest.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{DfaError, Result};
use crate::surplus::{RiskReport, ScenarioPaths, METRICS};

use super::config::RunConfig;
use super::data::Table;
use super::sim::{RunOutput, ScenarioCapital};

pub const RISK_REPORT: &str = "risk_report.csv";
pub const CAGR: &str = "cagr.csv";
pub const PATHS: &str = "paths.csv";
pub const LIABILITIES: &str = "liabilities.csv";
pub const INITIAL_CAPITAL: &str = "initial_capital.csv";
pub const MANIFEST: &str = "manifest.txt";

struct CsvOut {
    path: std::path::PathBuf,
    w: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<CsvOut> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| DfaError::io(&path, e))?;
        let mut out = CsvOut {
            w: csv::Writer::from_writer(BufWriter::new(file)),
            path,
        };
        out.row(header)?;
        Ok(out)
    }

    fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(|e| DfaError::csv(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| DfaError::io(&self.path, e))
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| DfaError::io(dir, e))
}

/// Writes `risk_report.csv` and `cagr.csv`, plus `paths.csv` and
/// `liabilities.csv` when paths are given.
pub fn emit_report(report: &RiskReport, paths: Option<&[ScenarioPaths]>, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    let mut rr = CsvOut::create(out_dir, RISK_REPORT, &["scenario", "year", "metric", "value", "n_paths"])?;
    for sc in &report.scenarios {
        let n = sc.n_paths.to_string();
        for y in &sc.years {
            let values = [
                Some(y.expected_surplus),
                Some(y.median_surplus),
                Some(y.insolvency_probability),
                y.deficit_given_insolvency,
            ];
            for (metric, v) in METRICS.iter().zip(values) {
                rr.row([sc.scenario_id.as_str(), &y.year.to_string(), metric, &opt(v), &n])?;
            }
        }
    }
    rr.finish()?;

    let mut cg = CsvOut::create(out_dir, CAGR, &["scenario", "horizon", "cagr", "n_paths"])?;
    for sc in &report.scenarios {
        for (h, v) in &sc.cagr {
            cg.row([sc.scenario_id.as_str(), &h.to_string(), &opt(*v), &sc.n_paths.to_string()])?;
        }
    }
    cg.finish()?;

    if let Some(paths) = paths {
        let mut pc = CsvOut::create(out_dir, PATHS, &["scenario", "path", "year", "market_capital"])?;
        let mut lc = CsvOut::create(out_dir, LIABILITIES, &["scenario", "path", "year", "total_claims"])?;
        for sc in paths {
            for (i, (cap, claims)) in sc.capital.iter().zip(&sc.claims).enumerate() {
                let idx = i.to_string();
                for (t, k) in cap.iter().enumerate() {
                    let year = (sc.start_year + t as i32).to_string();
                    pc.row([sc.scenario_id.as_str(), &idx, &year, &num(*k)])?;
                    if t > 0 {
                        lc.row([sc.scenario_id.as_str(), &idx, &year, &num(claims[t])])?;
                    }
                }
            }
        }
        pc.finish()?;
        lc.finish()?;
    }
    Ok(())
}

fn emit_capital(capital: &[ScenarioCapital], out_dir: &Path) -> Result<()> {
    let mut c = CsvOut::create(out_dir, INITIAL_CAPITAL, &["scenario", "insurer", "base_capital", "initial_capital"])?;
    for sc in capital {
        for ins in &sc.insurers {
            c.row([
                sc.scenario_id.as_str(),
                &ins.insurer_id,
                &opt(ins.base),
                &num(ins.initial_capital),
            ])?;
        }
    }
    c.finish()
}

/// SHA-256 of the canonical TOML form of a configuration.
pub fn config_hash(config: &RunConfig) -> Result<String> {
    let text = toml::to_string(config).map_err(|e| DfaError::Config(format!("cannot serialise configuration: {e}")))?;
    Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_manifest(config: &RunConfig, out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    let path = out_dir.join(MANIFEST);
    let scenarios: Vec<&str> = config.scenarios.iter().map(|s| s.id.as_str()).collect();
    let body = format!(
        "engine = climate-dfa {}\nconfig_sha256 = {}\nmaster_seed = {}\nn_paths = {}\nyears = {}..{}\ninner_samples = {}\nscenarios = {}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash(config)?,
        config.run.master_seed,
        config.run.n_paths,
        config.run.start_year,
        config.run.end_year,
        config.run.inner_samples,
        scenarios.join(","),
    );
    std::fs::write(&path, body).map_err(|e| DfaError::io(&path, e))
}

/// Writes every output file of a simulation run.
pub fn write_run(run: &RunOutput, out_dir: &Path) -> Result<()> {
    let paths = run.config.run.write_paths.then_some(run.paths.as_slice());
    emit_report(&run.report, paths, out_dir)?;
    emit_capital(&run.capital, out_dir)?;
    write_manifest(&run.config, out_dir)
}

/// Reads `paths.csv` and `liabilities.csv` back into per-scenario paths, in
/// the order scenarios first appear.
pub fn read_paths(dir: &Path) -> Result<Vec<ScenarioPaths>> {
    let caps = Table::read(&dir.join(PATHS))?;
    let liab = Table::read(&dir.join(LIABILITIES))?;
    let mut order: Vec<String> = Vec::new();
    // scenario -> path -> year -> (capital, claims)
    let mut data: BTreeMap<String, BTreeMap<usize, BTreeMap<i32, (Option<f64>, Option<f64>)>>> = BTreeMap::new();
    for (table, col, is_capital) in [(&caps, "market_capital", true), (&liab, "total_claims", false)] {
        let ids = table.text_column("scenario")?;
        let paths = table.text_column("path")?;
        let years = table.text_column("year")?;
        let values = table.numeric_column(col)?;
        for (((id, p), y), v) in ids.into_iter().zip(paths).zip(years).zip(values) {
            let bad = |what: &str| DfaError::Parse {
                path: table.path.clone(),
                message: format!("{what} `{}`", if what == "path" { p } else { y }),
            };
            let p: usize = p.parse().map_err(|_| bad("path"))?;
            let y: i32 = y.parse().map_err(|_| bad("year"))?;
            if !data.contains_key(id) {
                order.push(id.to_string());
            }
            let slot = data
                .entry(id.to_string())
                .or_default()
                .entry(p)
                .or_default()
                .entry(y)
                .or_default();
            if is_capital {
                slot.0 = Some(v);
            } else {
                slot.1 = Some(v);
            }
        }
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let paths = &data[&id];
        let incomplete = |message: String| DfaError::Parse {
            path: dir.join(PATHS),
            message: format!("scenario `{id}`: {message}"),
        };
        let start = *paths
            .values()
            .flat_map(|p| p.keys())
            .min()
            .ok_or_else(|| incomplete("no rows".into()))?;
        let mut capital = Vec::with_capacity(paths.len());
        let mut claims = Vec::with_capacity(paths.len());
        for (expect, (&idx, years)) in paths.iter().enumerate() {
            if idx != expect {
                return Err(incomplete(format!("path {expect} is missing")));
            }
            let mut k = Vec::with_capacity(years.len());
            let mut l = Vec::with_capacity(years.len());
            for (t, (&year, &(cap, claim))) in years.iter().enumerate() {
                if year != start + t as i32 {
                    return Err(incomplete(format!("path {idx} skips year {}", start + t as i32)));
                }
                k.push(cap.ok_or_else(|| incomplete(format!("path {idx} has no capital for {year}")))?);
                l.push(if t == 0 {
                    0.0
                } else {
                    claim.ok_or_else(|| incomplete(format!("path {idx} has no claims for {year}")))?
                });
            }
            capital.push(k);
            claims.push(l);
        }
        out.push(ScenarioPaths {
            scenario_id: id,
            start_year: start,
            capital,
            claims,
        });
    }
    Ok(out)
}
