//! Empirical pipeline: read a wide CSV of asset returns and a CSV of factors,
//! align them by ISO calendar week, keep the assets observed in every common
//! week, fit the time-varying factor model and run the test battery together
//! with per-asset Box–Pierce diagnostics.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::chi_square_sf;
use crate::error::{Error, Result};
use crate::panel::{FactorSeries, ReturnPanel};
use crate::pipeline::{fit_panel, report_from_fit, BatteryConfig, BatteryReport};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_BOX_PIERCE_LAG: usize = 10;
pub const DEFAULT_DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    #[default]
    Decimal,
    /// Values are in percent and are divided by 100 on ingestion.
    Percent,
}

impl Units {
    fn scale(&self) -> f64 {
        match self {
            Units::Decimal => 1.0,
            Units::Percent => 0.01,
        }
    }
}

/// Input files. The returns file has a date column followed by one column per
/// asset; the factors file has a date column, the factor columns and a
/// risk-free column named `RF`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSource {
    pub returns: PathBuf,
    pub factors: PathBuf,
    #[serde(default = "default_date_format")]
    pub date_format: String,
    #[serde(default)]
    pub return_units: Units,
    #[serde(default)]
    pub factor_units: Units,
}

fn default_date_format() -> String {
    DEFAULT_DATE_FORMAT.to_string()
}

impl PanelSource {
    pub fn new(returns: impl Into<PathBuf>, factors: impl Into<PathBuf>) -> Self {
        Self {
            returns: returns.into(),
            factors: factors.into(),
            date_format: default_date_format(),
            return_units: Units::Decimal,
            factor_units: Units::Decimal,
        }
    }
}

type Week = (i32, u32);

struct Table {
    columns: Vec<String>,
    /// (ISO week, original date string, values)
    rows: Vec<(Week, String, Vec<Option<f64>>)>,
}

fn parse_value(raw: &str) -> std::result::Result<Option<f64>, String> {
    let v = raw.trim();
    if v.is_empty() || ["na", "nan", "."].contains(&v.to_ascii_lowercase().as_str()) {
        return Ok(None);
    }
    v.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("cannot parse {v:?} as a number"))
}

fn read_table(path: &Path, date_format: &str, scale: f64) -> Result<Table> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(parse_err(1, "expected a date column and at least one value column".into()));
    }
    let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    let mut seen: HashMap<Week, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let date_str = record.get(0).unwrap_or_default().to_string();
        let date = NaiveDate::parse_from_str(&date_str, date_format)
            .map_err(|e| parse_err(line, format!("date {date_str:?}: {e}")))?;
        let iso = date.iso_week();
        let week = (iso.year(), iso.week());
        if let Some(prev) = seen.insert(week, line) {
            return Err(parse_err(
                line,
                format!("ISO week {}-W{:02} already appears on line {prev}", week.0, week.1),
            ));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|raw| parse_value(raw).map(|v| v.map(|x| x * scale)))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| parse_err(line, m))?;
        rows.push((week, date_str, values));
    }
    Ok(Table { columns, rows })
}

/// The aligned, balanced panel and what was dropped to get it.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedPanel {
    pub returns: ReturnPanel,
    pub factors: FactorSeries,
    pub dropped_assets: Vec<String>,
}

/// Joins on ISO week, forms excess returns `R - RF` and drops every asset with
/// a missing value in the common weeks. Assets keep their input order and
/// weeks are sorted in time.
pub fn ingest_and_balance(src: &PanelSource) -> Result<BalancedPanel> {
    let rets = read_table(&src.returns, &src.date_format, src.return_units.scale())?;
    let facs = read_table(&src.factors, &src.date_format, src.factor_units.scale())?;
    let rf_col = facs
        .columns
        .iter()
        .position(|c| c.eq_ignore_ascii_case("rf"))
        .ok_or_else(|| Error::Parse {
            path: src.factors.clone(),
            line: 1,
            message: "no RF column".into(),
        })?;
    let factor_cols: Vec<usize> = (0..facs.columns.len()).filter(|&j| j != rf_col).collect();

    let fac_by_week: BTreeMap<Week, &Vec<Option<f64>>> = facs.rows.iter().map(|(w, _, v)| (*w, v)).collect();
    let mut common: Vec<(&Week, &String, &Vec<Option<f64>>, &Vec<Option<f64>>)> = rets
        .rows
        .iter()
        .filter_map(|(w, d, r)| fac_by_week.get(w).map(|f| (w, d, r, *f)))
        .collect();
    common.sort_by_key(|(w, ..)| **w);
    if common.is_empty() {
        return Err(Error::Alignment(format!(
            "{} and {} share no ISO week",
            src.returns.display(),
            src.factors.display()
        )));
    }
    for (w, ..) in &common {
        let f = fac_by_week[w];
        if f.iter().any(Option::is_none) {
            return Err(Error::Alignment(format!(
                "factor file has a missing value in common week {}-W{:02}",
                w.0, w.1
            )));
        }
    }

    let keep: Vec<usize> = (0..rets.columns.len())
        .filter(|&i| common.iter().all(|(_, _, r, _)| r[i].is_some()))
        .collect();
    let dropped_assets: Vec<String> = (0..rets.columns.len())
        .filter(|i| !keep.contains(i))
        .map(|i| rets.columns[i].clone())
        .collect();
    if keep.is_empty() {
        return Err(Error::Alignment("no asset is complete over the common weeks".into()));
    }
    let periods = common.len();
    let returns = DMatrix::from_fn(periods, keep.len(), |t, k| {
        let (_, _, r, f) = common[t];
        r[keep[k]].unwrap() - f[rf_col].unwrap()
    });
    let factor_values = DMatrix::from_fn(periods, factor_cols.len(), |t, j| common[t].3[factor_cols[j]].unwrap());
    let assets = keep.iter().map(|&i| rets.columns[i].clone()).collect();
    let dates = common.iter().map(|(_, d, ..)| (*d).clone()).collect();
    log::info!(
        "balanced panel: T = {periods}, N = {} ({} assets dropped)",
        keep.len(),
        dropped_assets.len()
    );
    Ok(BalancedPanel {
        returns: ReturnPanel::new(returns, assets, dates)?,
        factors: FactorSeries {
            values: factor_values,
            names: factor_cols.iter().map(|&j| facs.columns[j].clone()).collect(),
        },
        dropped_assets,
    })
}

/// Box–Pierce `Q = T sum_{k=1}^m rho_k^2` and its chi-square(m) p-value.
pub fn box_pierce(x: &[f64], lag: usize) -> Result<(f64, f64)> {
    let n = x.len();
    if lag == 0 || lag >= n {
        return Err(Error::Domain(format!("Box-Pierce lag {lag} must lie in 1..{n}")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if c0 <= 0.0 {
        return Err(Error::DegenerateSeries("Box-Pierce on a constant series".into()));
    }
    let q = n as f64
        * (1..=lag)
            .map(|k| {
                let rho = d[k..].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / c0;
                rho * rho
            })
            .sum::<f64>();
    Ok((q, chi_square_sf(q, lag as f64)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub battery: BatteryConfig,
    pub box_pierce_lag: usize,
}

impl Default for EmpiricalConfig {
    fn default() -> Self {
        Self {
            battery: BatteryConfig::default(),
            box_pierce_lag: DEFAULT_BOX_PIERCE_LAG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetDiagnostic {
    pub asset: String,
    pub q: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub format_version: u32,
    pub dropped_assets: Vec<String>,
    pub factor_names: Vec<String>,
    pub battery: BatteryReport,
    pub box_pierce_lag: usize,
    /// Share of assets whose residuals reject white noise at 5%.
    pub white_noise_rejection_share: f64,
    pub box_pierce: Vec<AssetDiagnostic>,
}

pub fn run_on_panel(data: &BalancedPanel, cfg: &EmpiricalConfig) -> Result<EmpiricalReport> {
    let fit = fit_panel(&data.returns, &data.factors, cfg.battery.spline)?;
    let battery = report_from_fit(&fit, &cfg.battery)?;
    let box_pierce = (0..fit.dims.assets)
        .into_par_iter()
        .map(|i| {
            let (q, p_value) = box_pierce(fit.residuals.column(i).as_slice(), cfg.box_pierce_lag)?;
            Ok(AssetDiagnostic {
                asset: data.returns.assets[i].clone(),
                q,
                p_value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let share = box_pierce.iter().filter(|d| d.p_value < 0.05).count() as f64 / box_pierce.len() as f64;
    Ok(EmpiricalReport {
        format_version: FORMAT_VERSION,
        dropped_assets: data.dropped_assets.clone(),
        factor_names: data.factors.names.clone(),
        battery,
        box_pierce_lag: cfg.box_pierce_lag,
        white_noise_rejection_share: share,
        box_pierce,
    })
}

pub fn run_empirical(src: &PanelSource, cfg: &EmpiricalConfig) -> Result<EmpiricalReport> {
    run_on_panel(&ingest_and_balance(src)?, cfg)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn write_box_pierce_csv(report: &EmpiricalReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["format_version", "asset", "lag", "q", "p_value"])
        .map_err(|e| csv_error(path, e))?;
    for d in &report.box_pierce {
        w.write_record([
            report.format_version.to_string(),
            d.asset.clone(),
            report.box_pierce_lag.to_string(),
            d.q.to_string(),
            d.p_value.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the balanced panel back out as a returns file of excess returns and
/// a factors file with a zero `RF` column, so that re-ingesting the pair gives
/// the same matrices.
pub fn write_balanced(data: &BalancedPanel, returns_path: &Path, factors_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(returns_path).map_err(|e| csv_error(returns_path, e))?;
    let mut header = vec!["date".to_string()];
    header.extend(data.returns.assets.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(returns_path, e))?;
    for (t, date) in data.returns.dates.iter().enumerate() {
        let mut rec = vec![date.clone()];
        rec.extend(data.returns.returns.row(t).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_error(returns_path, e))?;
    }
    w.flush().map_err(|e| Error::io(returns_path, e))?;

    let mut w = csv::Writer::from_path(factors_path).map_err(|e| csv_error(factors_path, e))?;
    let mut header = vec!["date".to_string()];
    header.extend(data.factors.names.iter().cloned());
    header.push("RF".into());
    w.write_record(&header).map_err(|e| csv_error(factors_path, e))?;
    for (t, date) in data.returns.dates.iter().enumerate() {
        let mut rec = vec![date.clone()];
        rec.extend(data.factors.values.row(t).iter().map(|v| v.to_string()));
        rec.push("0".into());
        w.write_record(&rec).map_err(|e| csv_error(factors_path, e))?;
    }
    w.flush().map_err(|e| Error::io(factors_path, e))
}
