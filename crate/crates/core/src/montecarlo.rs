//! Replication driver for size tables and power curves.
//!
//! Replication `r` of a cell draws its panel from the stream seeded by
//! `derive_seed(plan.seed, r)` and its bootstrap from a second seed derived
//! from that one. Cells are therefore independent of grid order and of the
//! number of worker threads. Per-replication p-values are kept, so rejection
//! rates can be read off at any level after the fact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{ExperimentPlan, PanelSimulator};
use crate::error::{Error, Result};
use crate::outcome::TestName;
use crate::pipeline::{choose_block_length, fit_panel, run_on_fit, BatteryConfig};
use crate::rng::{derive_seed, stream};

pub const FORMAT_VERSION: u32 = 1;

/// Tag separating the bootstrap seed from the simulation seed of a replication.
const BOOTSTRAP_TAG: u64 = 0xB0_07;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SIZE_FILE: &str = "size_power.csv";
pub const POWER_FILE: &str = "power_curves.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub block_length: usize,
    /// p-values in the order SUM, MAX, CC, DSUM, DMAX, DCC.
    pub p_values: [f64; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub plan: ExperimentPlan,
    pub records: Vec<ReplicationRecord>,
}

/// `sqrt(p (1 - p) / reps)`.
pub fn monte_carlo_se(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

impl CellResult {
    pub fn replications(&self) -> usize {
        self.records.len()
    }

    pub fn rejection_rate(&self, test: TestName, level: f64) -> f64 {
        let hits = self
            .records
            .iter()
            .filter(|r| r.p_values[test.index()] < level)
            .count();
        hits as f64 / self.records.len() as f64
    }

    pub fn standard_error(&self, test: TestName, level: f64) -> f64 {
        monte_carlo_se(self.rejection_rate(test, level), self.replications())
    }

    pub fn mean_block_length(&self) -> f64 {
        self.records.iter().map(|r| r.block_length as f64).sum::<f64>() / self.records.len() as f64
    }

    pub fn row(&self) -> CellRow {
        let plan = &self.plan;
        let level = plan.level;
        CellRow {
            format_version: FORMAT_VERSION,
            example: plan.example.label().to_string(),
            dependence: plan.dependence.label().to_string(),
            periods: plan.periods,
            assets: plan.assets,
            innovation: plan.innovation.label().to_string(),
            sparsity: plan.alternative.map(|a| a.sparsity),
            c_m: plan.signal_constant(),
            replications: self.replications(),
            bootstrap_reps: plan.bootstrap_reps,
            level,
            block_length_policy: match plan.block_length {
                Some(l) => format!("fixed:{l}"),
                None => "selected".to_string(),
            },
            bandwidth_policy: match plan.bandwidth {
                Some(m) => format!("fixed:{m}"),
                None => "default".to_string(),
            },
            seed: plan.seed,
            mean_block_length: self.mean_block_length(),
            rejection: TestName::ALL.map(|t| self.rejection_rate(t, level)),
            standard_error: TestName::ALL.map(|t| self.standard_error(t, level)),
        }
    }
}

/// One row of the size/power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub format_version: u32,
    pub example: String,
    pub dependence: String,
    pub periods: usize,
    pub assets: usize,
    pub innovation: String,
    /// `None` under the null.
    pub sparsity: Option<usize>,
    pub c_m: Option<f64>,
    pub replications: usize,
    pub bootstrap_reps: usize,
    pub level: f64,
    pub block_length_policy: String,
    pub bandwidth_policy: String,
    pub seed: u64,
    pub mean_block_length: f64,
    pub rejection: [f64; 6],
    pub standard_error: [f64; 6],
}

impl CellRow {
    pub fn hypothesis(&self) -> String {
        self.sparsity.map_or_else(|| "null".to_string(), |s| s.to_string())
    }
}

pub fn battery_config(plan: &ExperimentPlan, replication_seed: u64) -> BatteryConfig {
    BatteryConfig {
        spline: plan.spline,
        block_length: plan.block_length,
        bandwidth: plan.bandwidth,
        bootstrap_reps: plan.bootstrap_reps,
        seed: derive_seed(replication_seed, BOOTSTRAP_TAG),
        tests: Vec::new(),
    }
}

pub fn run_replication(sim: &PanelSimulator, replication: usize) -> Result<ReplicationRecord> {
    let plan = sim.plan();
    let seed = derive_seed(plan.seed, replication as u64);
    let attempt = || -> Result<ReplicationRecord> {
        let data = sim.simulate(&mut stream(seed))?;
        let cfg = battery_config(plan, seed);
        let fit = fit_panel(&data.panel, &data.factors, cfg.spline)?;
        let block_length = choose_block_length(&fit, cfg.block_length)?.block_length();
        let outcomes = run_on_fit(&fit, &cfg, Some(block_length))?;
        let mut p_values = [f64::NAN; 6];
        for o in &outcomes {
            p_values[o.name.index()] = o.p_value;
        }
        Ok(ReplicationRecord {
            replication,
            seed,
            block_length,
            p_values,
        })
    };
    attempt().map_err(|e| Error::Replication {
        replication,
        seed,
        source: Box::new(e),
    })
}

/// Runs every replication of one cell. The first failing replication (in
/// replication order) aborts the cell.
pub fn run_cell(plan: &ExperimentPlan) -> Result<CellResult> {
    let sim = PanelSimulator::new(plan)?;
    let done = AtomicUsize::new(0);
    let step = (plan.replications / 10).max(1);
    let records: Vec<Result<ReplicationRecord>> = (0..plan.replications)
        .into_par_iter()
        .map(|r| {
            let out = run_replication(&sim, r);
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n.is_multiple_of(step) || n == plan.replications {
                log::info!("{} replications {n}/{}", describe(plan), plan.replications);
            }
            out
        })
        .collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CellResult {
        plan: plan.clone(),
        records,
    })
}

pub fn describe(plan: &ExperimentPlan) -> String {
    let hyp = plan
        .alternative
        .map_or_else(|| "null".to_string(), |a| format!("s={}", a.sparsity));
    format!(
        "[example {} M={} T={} N={} {} {}]",
        plan.example.label(),
        plan.dependence.label(),
        plan.periods,
        plan.assets,
        plan.innovation.label(),
        hyp
    )
}

/// Default sparsity grid `{1, 5, 9, ..., 101}`, truncated at N.
pub fn default_sparsities(assets: usize) -> Vec<usize> {
    (1..=101).step_by(4).filter(|&s| s <= assets).collect()
}

/// Alternative plans along a power curve, one per sparsity level.
pub fn power_curve(base: &ExperimentPlan, sparsities: &[usize]) -> Vec<ExperimentPlan> {
    sparsities
        .iter()
        .map(|&s| {
            let mut plan = base.clone();
            plan.alternative = Some(crate::dgp::AlphaAlternative {
                sparsity: s,
                c_m: base.alternative.and_then(|a| a.c_m),
            });
            plan
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub cells: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub plan: ExperimentPlan,
    pub row: CellRow,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Manifest {
                format_version: FORMAT_VERSION,
                cells: Vec::new(),
            });
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "{}: manifest format {} is not {}",
                path.display(),
                manifest.format_version,
                FORMAT_VERSION
            )));
        }
        Ok(manifest)
    }

    pub fn find(&self, plan: &ExperimentPlan) -> Option<&CellRow> {
        self.cells.iter().find(|e| &e.plan == plan).map(|e| &e.row)
    }

    /// Writes through a temporary file so an interrupted run leaves the old
    /// manifest intact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub rows: Vec<CellRow>,
    pub computed: usize,
    pub reused: usize,
    pub size_path: PathBuf,
    pub power_path: PathBuf,
}

/// Runs each cell not already recorded in the manifest under `out_dir`, then
/// rewrites both CSV tables from the manifest rows in plan order.
pub fn run_grid(plans: &[ExperimentPlan], out_dir: &Path) -> Result<GridSummary> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let mut manifest = Manifest::load(&manifest_path)?;
    let (mut computed, mut reused) = (0, 0);
    let mut rows = Vec::with_capacity(plans.len());
    for plan in plans {
        if let Some(row) = manifest.find(plan) {
            log::info!("{} already in manifest", describe(plan));
            rows.push(row.clone());
            reused += 1;
            continue;
        }
        let start = std::time::Instant::now();
        let row = run_cell(plan)?.row();
        log::info!("{} done in {:.1?}", describe(plan), start.elapsed());
        manifest.cells.push(ManifestEntry {
            plan: plan.clone(),
            row: row.clone(),
        });
        manifest.save(&manifest_path)?;
        rows.push(row);
        computed += 1;
    }
    let size_path = out_dir.join(SIZE_FILE);
    let power_path = out_dir.join(POWER_FILE);
    write_size_table(&rows, &size_path)?;
    write_power_table(&rows, &power_path)?;
    Ok(GridSummary {
        rows,
        computed,
        reused,
        size_path,
        power_path,
    })
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

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Wide table: one row per cell, rejection rate and standard error per test.
pub fn write_size_table(rows: &[CellRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = [
        "format_version",
        "example",
        "dependence",
        "T",
        "N",
        "innovation",
        "hypothesis",
        "c_m",
        "replications",
        "bootstrap_reps",
        "level",
        "block_length_policy",
        "bandwidth_policy",
        "seed",
        "mean_block_length",
    ]
    .map(String::from)
    .to_vec();
    for t in TestName::ALL {
        header.push(t.as_str().to_string());
        header.push(format!("{}_se", t.as_str()));
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        let mut rec = vec![
            row.format_version.to_string(),
            row.example.clone(),
            row.dependence.clone(),
            row.periods.to_string(),
            row.assets.to_string(),
            row.innovation.clone(),
            row.hypothesis(),
            fmt_opt(row.c_m),
            row.replications.to_string(),
            row.bootstrap_reps.to_string(),
            row.level.to_string(),
            row.block_length_policy.clone(),
            row.bandwidth_policy.clone(),
            row.seed.to_string(),
            row.mean_block_length.to_string(),
        ];
        for k in 0..6 {
            rec.push(row.rejection[k].to_string());
            rec.push(row.standard_error[k].to_string());
        }
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Long table for plotting: one row per (alternative cell, test).
pub fn write_power_table(rows: &[CellRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "format_version",
        "example",
        "dependence",
        "T",
        "N",
        "innovation",
        "sparsity",
        "c_m",
        "test",
        "rejection",
        "se",
        "replications",
    ])
    .map_err(|e| csv_error(path, e))?;
    for row in rows {
        let Some(s) = row.sparsity else { continue };
        for t in TestName::ALL {
            w.write_record([
                row.format_version.to_string(),
                row.example.clone(),
                row.dependence.clone(),
                row.periods.to_string(),
                row.assets.to_string(),
                row.innovation.clone(),
                s.to_string(),
                fmt_opt(row.c_m),
                t.as_str().to_string(),
                row.rejection[t.index()].to_string(),
                row.standard_error[t.index()].to_string(),
                row.replications.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rejection rates keyed by test name, at the plan's level.
pub fn rates(result: &CellResult) -> BTreeMap<TestName, f64> {
    TestName::ALL
        .into_iter()
        .map(|t| (t, result.rejection_rate(t, result.plan.level)))
        .collect()
}
