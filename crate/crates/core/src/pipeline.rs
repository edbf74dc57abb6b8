//! Fit once, then run any subset of the six tests on a panel.

use serde::{Deserialize, Serialize};

use crate::blocklen::{select_block_length, BlockLengthReport};
use crate::classical::{classical_battery, max_test_indep, sum_test_indep};
use crate::dependent::{
    default_bandwidth, dependent_battery, dmax_test, dsum_test, BootstrapPlan, LrvConfig, MaxCalibration,
};
use crate::error::{Error, Result};
use crate::outcome::{TestName, TestOutcome};
use crate::panel::{FactorSeries, ReturnPanel};
use crate::projection::{fit_sieve, SieveFit};
use crate::spline::{build_basis, build_design, SplineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub spline: SplineConfig,
    /// Fixed block length; selected from the centered residuals when absent.
    pub block_length: Option<usize>,
    /// Fixed Bartlett bandwidth; `default_bandwidth(T)` when absent.
    pub bandwidth: Option<usize>,
    pub bootstrap_reps: usize,
    pub seed: u64,
    /// Tests to run; empty means all six.
    pub tests: Vec<TestName>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            spline: SplineConfig::default(),
            block_length: None,
            bandwidth: None,
            bootstrap_reps: 500,
            seed: 0,
            tests: Vec::new(),
        }
    }
}

impl BatteryConfig {
    fn wants(&self, name: TestName) -> bool {
        self.tests.is_empty() || self.tests.contains(&name)
    }

    fn needs_bootstrap(&self) -> bool {
        [TestName::Dsum, TestName::Dmax, TestName::Dcc].into_iter().any(|t| self.wants(t))
    }
}

/// How the bootstrap block length was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source")]
pub enum BlockChoice {
    Override { block_length: usize },
    Selected(BlockLengthReport),
}

impl BlockChoice {
    pub fn block_length(&self) -> usize {
        match self {
            BlockChoice::Override { block_length } => *block_length,
            BlockChoice::Selected(report) => report.selected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub periods: usize,
    pub assets: usize,
    pub factors: usize,
    pub basis_dim: usize,
    pub condition: f64,
    /// Absent when only the independence tests ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<BlockChoice>,
    pub bandwidth: usize,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub outcomes: Vec<TestOutcome>,
}

impl BatteryReport {
    pub fn block_length(&self) -> Option<usize> {
        self.block.as_ref().map(BlockChoice::block_length)
    }

    pub fn get(&self, name: TestName) -> Option<&TestOutcome> {
        self.outcomes.iter().find(|o| o.name == name)
    }
}

/// Basis, design and null-restricted fit.
pub fn fit_panel(panel: &ReturnPanel, factors: &FactorSeries, spline: SplineConfig) -> Result<SieveFit> {
    if factors.periods() != panel.periods() {
        return Err(Error::Dimension(format!(
            "returns have {} periods, factors {}",
            panel.periods(),
            factors.periods()
        )));
    }
    let basis = build_basis(panel.periods(), spline)?;
    let design = build_design(&basis, factors)?;
    fit_sieve(panel, &design)
}

pub fn choose_block_length(fit: &SieveFit, fixed: Option<usize>) -> Result<BlockChoice> {
    match fixed {
        Some(block_length) => Ok(BlockChoice::Override { block_length }),
        None => Ok(BlockChoice::Selected(select_block_length(&fit.centered_residuals())?)),
    }
}

/// Runs the requested tests on an existing fit. Outcomes come back in the
/// canonical order SUM, MAX, CC, DSUM, DMAX, DCC.
pub fn run_on_fit(fit: &SieveFit, cfg: &BatteryConfig, block_length: Option<usize>) -> Result<Vec<TestOutcome>> {
    let periods = fit.dims.periods;
    let mut out = Vec::with_capacity(6);

    let (sum, max, cc) = (cfg.wants(TestName::Sum), cfg.wants(TestName::Max), cfg.wants(TestName::Cc));
    if cc || (sum && max) {
        out.extend(classical_battery(fit)?);
    } else if sum {
        out.push(sum_test_indep(fit)?);
    } else if max {
        out.push(max_test_indep(fit)?);
    }

    let (dsum, dmax, dcc) = (cfg.wants(TestName::Dsum), cfg.wants(TestName::Dmax), cfg.wants(TestName::Dcc));
    if dsum || dmax || dcc {
        let block_length = block_length.ok_or_else(|| Error::Plan("no block length for the bootstrap tests".into()))?;
        let plan = BootstrapPlan::new(block_length, cfg.bootstrap_reps, cfg.seed)?;
        let lrv = LrvConfig::new(cfg.bandwidth.unwrap_or_else(|| default_bandwidth(periods)))?;
        if dcc || (dsum && dmax) {
            out.extend(dependent_battery(fit, lrv, &plan)?);
        } else if dsum {
            out.push(dsum_test(fit, &plan)?);
        } else {
            out.push(dmax_test(fit, lrv, &plan, MaxCalibration::Bootstrap)?);
        }
    }
    out.retain(|o| cfg.wants(o.name));
    Ok(out)
}

pub fn run_battery(panel: &ReturnPanel, factors: &FactorSeries, cfg: &BatteryConfig) -> Result<BatteryReport> {
    let fit = fit_panel(panel, factors, cfg.spline)?;
    report_from_fit(&fit, cfg)
}

/// Chooses the block length if a bootstrap test is requested, then runs the battery.
pub fn report_from_fit(fit: &SieveFit, cfg: &BatteryConfig) -> Result<BatteryReport> {
    let block = if cfg.needs_bootstrap() {
        Some(choose_block_length(fit, cfg.block_length)?)
    } else {
        None
    };
    let outcomes = run_on_fit(fit, cfg, block.as_ref().map(BlockChoice::block_length))?;
    Ok(BatteryReport {
        periods: fit.dims.periods,
        assets: fit.dims.assets,
        factors: fit.dims.factors,
        basis_dim: fit.dims.basis_dim,
        condition: fit.condition,
        block,
        bandwidth: cfg.bandwidth.unwrap_or_else(|| default_bandwidth(fit.dims.periods)),
        bootstrap_reps: cfg.bootstrap_reps,
        seed: cfg.seed,
        outcomes,
    })
}
