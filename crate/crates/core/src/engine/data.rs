//! CSV ingestion.

use std::path::Path;

use crate::error::{DfaError, Result};

/// A CSV file held as text cells with named columns.
#[derive(Clone, Debug)]
pub struct Table {
    pub path: std::path::PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| DfaError::csv(path, e))?;
        let headers = rdr
            .headers()
            .map_err(|e| DfaError::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| DfaError::csv(path, e))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| DfaError::Parse {
            path: self.path.clone(),
            message: format!("missing column `{name}`"),
        })
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(line, r)| {
                r[i].parse::<f64>().map_err(|_| DfaError::Parse {
                    path: self.path.clone(),
                    message: format!("row {}: column `{name}` value `{}` is not a number", line + 1, r[i]),
                })
            })
            .collect()
    }
}

/// Reads a `year,value` series.
pub fn read_year_series(path: &Path) -> Result<Vec<(i32, f64)>> {
    let t = Table::read(path)?;
    let years = t.text_column("year")?;
    let values = t.numeric_column("value")?;
    years
        .iter()
        .zip(values)
        .map(|(y, v)| {
            let y = y.parse::<i32>().map_err(|_| DfaError::Parse {
                path: path.to_path_buf(),
                message: format!("year `{y}` is not an integer"),
            })?;
            Ok((y, v))
        })
        .collect()
}

/// A period label: `YYYY` or `YYYY-MM`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Period {
    pub year: i32,
    /// Calendar month 1..=12.
    pub month: Option<u32>,
}

pub fn parse_period(text: &str) -> Option<Period> {
    match text.split_once('-') {
        None => text.parse().ok().map(|year| Period { year, month: None }),
        Some((y, m)) => {
            let year = y.parse().ok()?;
            let month: u32 = m.parse().ok()?;
            (1..=12).contains(&month).then_some(Period {
                year,
                month: Some(month),
            })
        }
    }
}

/// Reads a `period,value` series and returns the values for `years` years
/// from `start_year`, annual or monthly, requiring every period to be present.
pub fn read_period_series(path: &Path, start_year: i32, years: usize, monthly: bool) -> Result<Vec<f64>> {
    let t = Table::read(path)?;
    let labels = t.text_column("period")?;
    let values = t.numeric_column("value")?;
    let per_year = if monthly { 12 } else { 1 };
    let mut out = vec![f64::NAN; years * per_year];
    for (label, v) in labels.iter().zip(values) {
        let p = parse_period(label).ok_or_else(|| DfaError::Parse {
            path: path.to_path_buf(),
            message: format!("period `{label}` is not YYYY or YYYY-MM"),
        })?;
        if p.month.is_some() != monthly {
            return Err(DfaError::Parse {
                path: path.to_path_buf(),
                message: format!(
                    "period `{label}` does not match the variable's {} resolution",
                    if monthly { "monthly" } else { "annual" }
                ),
            });
        }
        let offset = p.year - start_year;
        if offset < 0 || offset as usize >= years {
            continue;
        }
        let idx = offset as usize * per_year + p.month.map_or(0, |m| m as usize - 1);
        out[idx] = v;
    }
    if let Some(gap) = out.iter().position(|v| v.is_nan()) {
        let year = start_year + (gap / per_year) as i32;
        return Err(DfaError::Parse {
            path: path.to_path_buf(),
            message: if monthly {
                format!("missing period {year}-{:02}", gap % 12 + 1)
            } else {
                format!("missing period {year}")
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn year_series_round_trip() {
        let d = tempfile::tempdir().unwrap();
        let p = file(&d, "gdp.csv", "year,value\n2020,1.5\n2025,2\n");
        assert_eq!(read_year_series(&p).unwrap(), vec![(2020, 1.5), (2025, 2.0)]);
        let bad = file(&d, "bad.csv", "year,value\n2020,abc\n");
        assert!(matches!(read_year_series(&bad), Err(DfaError::Parse { .. })));
    }

    #[test]
    fn periods_parse() {
        assert_eq!(parse_period("2031"), Some(Period { year: 2031, month: None }));
        assert_eq!(parse_period("2031-07"), Some(Period { year: 2031, month: Some(7) }));
        assert_eq!(parse_period("2031-13"), None);
    }

    #[test]
    fn monthly_series_needs_every_month() {
        let d = tempfile::tempdir().unwrap();
        let mut body = String::from("period,value\n");
        for m in 1..=12 {
            body.push_str(&format!("2025-{m:02},{m}\n"));
        }
        let p = file(&d, "sst.csv", &body);
        assert_eq!(read_period_series(&p, 2025, 1, true).unwrap()[11], 12.0);
        let err = read_period_series(&p, 2025, 2, true).unwrap_err();
        assert!(err.to_string().contains("2026-01"));
        assert!(read_period_series(&p, 2025, 1, false).is_err());
    }
}
