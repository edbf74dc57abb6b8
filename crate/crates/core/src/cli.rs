//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::blocklen::{select_block_length, BlockLengthReport};
use crate::dgp::ExperimentPlan;
use crate::empirical::{
    ingest_and_balance, run_on_panel, write_box_pierce_csv, EmpiricalConfig, EmpiricalReport, PanelSource, Units,
    DEFAULT_BOX_PIERCE_LAG, DEFAULT_DATE_FORMAT,
};
use crate::error::{Error, Result};
use crate::montecarlo::{default_sparsities, power_curve, run_grid, CellRow};
use crate::outcome::{TestName, TestOutcome};
use crate::pipeline::{fit_panel, run_battery, BatteryConfig, BatteryReport};
use crate::rng::derive_seed;
use crate::spline::SplineConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tvalpha", version, about = "Alpha tests for time-varying factor models")]
pub struct Cli {
    /// Worker threads (defaults to the number of logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo grid described by a TOML file.
    Simulate(SimulateArgs),
    /// Run the test battery on a returns/factors pair.
    Test(TestArgs),
    /// Report the data-driven bootstrap block length.
    Blocklen(PanelArgs),
    /// Full empirical pipeline with Box–Pierce diagnostics.
    Empirical(EmpiricalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for the tables and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Base seed; each cell's seed is derived from it and the cell's own seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    #[arg(long)]
    pub returns: PathBuf,
    #[arg(long)]
    pub factors: PathBuf,
    #[arg(long, default_value = DEFAULT_DATE_FORMAT)]
    pub date_format: String,
    #[arg(long, value_enum, default_value = "decimal")]
    pub return_units: UnitsArg,
    #[arg(long, value_enum, default_value = "decimal")]
    pub factor_units: UnitsArg,
    #[arg(long, default_value_t = 4)]
    pub spline_order: usize,
    /// Basis dimension L (order plus interior knots).
    #[arg(long, default_value_t = 5)]
    pub basis_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitsArg {
    Decimal,
    Percent,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Decimal => Units::Decimal,
            UnitsArg::Percent => Units::Percent,
        }
    }
}

#[derive(Debug, Args)]
pub struct BatteryArgs {
    #[arg(long)]
    pub block_length: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub bootstrap_reps: usize,
    /// Comma-separated subset of SUM,MAX,CC,DSUM,DMAX,DCC.
    #[arg(long, value_delimiter = ',')]
    pub tests: Vec<TestName>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    #[command(flatten)]
    pub battery: BatteryArgs,
}

#[derive(Debug, Args)]
pub struct EmpiricalArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    #[command(flatten)]
    pub battery: BatteryArgs,
    #[arg(long, default_value_t = DEFAULT_BOX_PIERCE_LAG)]
    pub box_pierce_lag: usize,
    /// Directory for `report.json` and `box_pierce.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Grid configuration read by `simulate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub cell: Vec<ExperimentPlan>,
    #[serde(default)]
    pub power: Vec<PowerSpec>,
}

/// A power curve: the base plan repeated over a sparsity grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSpec {
    /// Defaults to `{1, 5, ..., 101}` truncated at N.
    #[serde(default)]
    pub sparsities: Option<Vec<usize>>,
    pub plan: ExperimentPlan,
}

impl GridConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |span| text[..span.start].matches('\n').count() + 1);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })
    }

    /// All cells in file order, with seeds derived from `base_seed`.
    pub fn plans(&self, base_seed: u64) -> Result<Vec<ExperimentPlan>> {
        let mut plans = self.cell.clone();
        for spec in &self.power {
            let grid = spec
                .sparsities
                .clone()
                .unwrap_or_else(|| default_sparsities(spec.plan.assets));
            plans.extend(power_curve(&spec.plan, &grid));
        }
        for plan in &mut plans {
            plan.seed = derive_seed(base_seed, plan.seed);
            plan.validate()?;
        }
        Ok(plans)
    }
}

fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::Plan(_))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .try_init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let out = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Test(args) => cmd_test(args),
        Command::Blocklen(args) => cmd_blocklen(args),
        Command::Empirical(args) => cmd_empirical(args),
    };
    match out {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            if is_usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn cmd_simulate(args: &SimulateArgs) -> std::result::Result<String, Failure> {
    let text = fs::read_to_string(&args.config).map_err(|e| usage(Error::io(&args.config, e)))?;
    let grid = GridConfig::parse(&text, &args.config).map_err(usage)?;
    let plans = grid.plans(args.seed).map_err(usage)?;
    let summary = run_grid(&plans, &args.out)?;
    log::info!("{} cells computed, {} reused", summary.computed, summary.reused);
    Ok(match args.format {
        Format::Json => json(&summary.rows),
        Format::Table => grid_table(&summary.rows),
    })
}

fn source(args: &PanelArgs) -> PanelSource {
    PanelSource {
        returns: args.returns.clone(),
        factors: args.factors.clone(),
        date_format: args.date_format.clone(),
        return_units: args.return_units.into(),
        factor_units: args.factor_units.into(),
    }
}

fn battery_config(panel: &PanelArgs, args: &BatteryArgs) -> std::result::Result<BatteryConfig, Failure> {
    Ok(BatteryConfig {
        spline: SplineConfig::with_basis_dim(panel.spline_order, panel.basis_dim).map_err(usage)?,
        block_length: args.block_length,
        bandwidth: args.bandwidth,
        bootstrap_reps: args.bootstrap_reps,
        seed: args.seed,
        tests: args.tests.clone(),
    })
}

/// JSON document printed by `test`.
#[derive(Debug, Serialize)]
pub struct TestReport<'a> {
    pub format_version: u32,
    pub dropped_assets: &'a [String],
    #[serde(flatten)]
    pub battery: &'a BatteryReport,
}

fn cmd_test(args: &TestArgs) -> std::result::Result<String, Failure> {
    let cfg = battery_config(&args.panel, &args.battery)?;
    let data = ingest_and_balance(&source(&args.panel))?;
    let report = run_battery(&data.returns, &data.factors, &cfg)?;
    Ok(match args.battery.format {
        Format::Json => json(&TestReport {
            format_version: crate::empirical::FORMAT_VERSION,
            dropped_assets: &data.dropped_assets,
            battery: &report,
        }),
        Format::Table => battery_table(&report),
    })
}

#[derive(Debug, Serialize)]
pub struct BlockLengthOutput {
    pub format_version: u32,
    pub periods: usize,
    pub assets: usize,
    #[serde(flatten)]
    pub report: BlockLengthReport,
}

fn cmd_blocklen(args: &PanelArgs) -> std::result::Result<String, Failure> {
    let spline = SplineConfig::with_basis_dim(args.spline_order, args.basis_dim).map_err(usage)?;
    let data = ingest_and_balance(&source(args))?;
    let fit = fit_panel(&data.returns, &data.factors, spline)?;
    let report = select_block_length(&fit.centered_residuals())?;
    Ok(json(&BlockLengthOutput {
        format_version: crate::empirical::FORMAT_VERSION,
        periods: fit.dims.periods,
        assets: fit.dims.assets,
        report,
    }))
}

fn cmd_empirical(args: &EmpiricalArgs) -> std::result::Result<String, Failure> {
    let cfg = EmpiricalConfig {
        battery: battery_config(&args.panel, &args.battery)?,
        box_pierce_lag: args.box_pierce_lag,
    };
    let data = ingest_and_balance(&source(&args.panel))?;
    let report = run_on_panel(&data, &cfg)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        fs::write(&path, json(&report)).map_err(|e| Error::io(&path, e))?;
        write_box_pierce_csv(&report, &dir.join("box_pierce.csv"))?;
    }
    Ok(match args.battery.format {
        Format::Json => json(&report),
        Format::Table => empirical_table(&report),
    })
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn outcome_lines(out: &mut String, outcomes: &[TestOutcome]) {
    let _ = writeln!(out, "{:<6} {:>14} {:>12}  calibration", "test", "statistic", "p-value");
    for o in outcomes {
        let _ = writeln!(
            out,
            "{:<6} {:>14.6} {:>12.4e}  {}",
            o.name.as_str(),
            o.statistic,
            o.p_value,
            serde_json::to_value(o.calibration)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        );
    }
}

pub fn battery_table(report: &BatteryReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "T = {}, N = {}, d = {}, L = {}",
        report.periods, report.assets, report.factors, report.basis_dim
    );
    if let Some(l) = report.block_length() {
        let _ = writeln!(
            out,
            "block length = {l}, bandwidth = {}, bootstrap reps = {}",
            report.bandwidth, report.bootstrap_reps
        );
    }
    outcome_lines(&mut out, &report.outcomes);
    out
}

fn empirical_table(report: &EmpiricalReport) -> String {
    let mut out = battery_table(&report.battery);
    let _ = writeln!(
        out,
        "Box-Pierce (lag {}): {:.1}% of assets reject white noise at 5%",
        report.box_pierce_lag,
        100.0 * report.white_noise_rejection_share
    );
    if !report.dropped_assets.is_empty() {
        let _ = writeln!(out, "dropped assets: {}", report.dropped_assets.join(", "));
    }
    out
}

pub fn grid_table(rows: &[CellRow]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<13} {:>4} {:>5} {:>5} {:<9} {:>5}", "example", "M", "T", "N", "innov", "s");
    for t in TestName::ALL {
        let _ = write!(out, " {:>6}", t.as_str());
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{:<13} {:>4} {:>5} {:>5} {:<9} {:>5}",
            r.example,
            r.dependence,
            r.periods,
            r.assets,
            r.innovation,
            r.hypothesis()
        );
        for v in r.rejection {
            let _ = write!(out, " {:>6.1}", 100.0 * v);
        }
        out.push('\n');
    }
    out
}
