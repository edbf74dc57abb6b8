//! Dependence-robust tests.
//!
//! DSUM centers and scales `T_DSUM = delta^'delta^` with the mean and variance
//! of its block-bootstrap counterpart. DMAX Studentizes each coordinate by a
//! Bartlett long-run variance and is calibrated either by the same bootstrap
//! or by the Gumbel limit. DCC combines the two p-values. When run together the
//! sum and max statistics share one pool of resamples.

pub mod bootstrap;
pub mod lrv;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::require_gumbel_dim;
use crate::combination::combine_pair;
use crate::dist::{gumbel_centering, gumbel_sf, normal_sf};
use crate::error::{Error, Result};
use crate::outcome::{Calibration, TestName, TestOutcome};
use crate::projection::{score_process, ScoreProcess, SieveFit};
use crate::rng::child_stream;

pub use bootstrap::{circular_blocks_resample, exact_bootstrap_mean, BootstrapPlan};
pub use lrv::{default_bandwidth, lrv_bartlett, weighted_autocovariance, LrvConfig};

use bootstrap::{draw_starts, resample_column, CircularPrefix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxCalibration {
    Bootstrap,
    Gumbel,
}

/// Bootstrap draws of the sum statistic and, optionally, of the max statistic.
#[derive(Debug, Clone)]
pub struct BootstrapPool {
    pub sum: Vec<f64>,
    pub max: Option<Vec<f64>>,
}

/// Runs `plan.replications` resamples of the centered score process.
///
/// Each replication `b` uses the stream derived from `(plan.seed, b)`, so the
/// pool does not depend on the thread count.
pub fn bootstrap_pool(score: &ScoreProcess, plan: &BootstrapPlan, lrv: Option<LrvConfig>) -> Result<BootstrapPool> {
    let x = &score.x_tilde;
    let periods = x.nrows();
    plan.validate_for(periods)?;
    if let Some(cfg) = lrv {
        cfg.validate_for(periods)?;
    }
    let t = periods as f64;
    let prefixes: Vec<CircularPrefix> = x
        .column_iter()
        .map(|c| CircularPrefix::new(c.as_slice()))
        .collect();

    let draws: Vec<(f64, Option<f64>)> = (0..plan.replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = child_stream(plan.seed, b as u64);
            let starts = draw_starts(periods, plan, &mut rng);
            let sum: f64 = prefixes
                .iter()
                .map(|p| (p.resampled_total(plan.block_length, &starts) / t).powi(2))
                .sum();
            let max = lrv.map(|cfg| {
                let mut buf = vec![0.0; periods];
                let mut best = f64::NEG_INFINITY;
                for col in x.column_iter() {
                    resample_column(col.as_slice(), plan.block_length, &starts, &mut buf);
                    let mean = buf.iter().sum::<f64>() / t;
                    let sigma = lrv::lrv_series(&buf, cfg.bandwidth);
                    // A nonpositive bootstrap variance makes the coordinate
                    // unbounded; count it as exceeding any observed value.
                    let stat = if sigma > 0.0 { t * mean * mean / sigma } else { f64::INFINITY };
                    best = best.max(stat);
                }
                best
            });
            (sum, max)
        })
        .collect();

    let sum = draws.iter().map(|d| d.0).collect();
    let max = lrv.map(|_| draws.iter().map(|d| d.1.unwrap_or(f64::NAN)).collect());
    Ok(BootstrapPool { sum, max })
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn dsum_from_pool(fit: &SieveFit, plan: &BootstrapPlan, draws: &[f64]) -> Result<TestOutcome> {
    if draws.len() < 2 {
        return Err(Error::Plan("DSUM needs at least two bootstrap replications".into()));
    }
    let t_dsum = fit.delta_hat.norm_squared();
    let (mu, sd) = mean_and_sd(draws);
    if !(sd > 0.0) {
        return Err(Error::DegenerateBootstrap { sd });
    }
    let q = (t_dsum - mu) / sd;
    Ok(TestOutcome::new(TestName::Dsum, q, normal_sf(q), Calibration::Bootstrap)
        .with("t_dsum", t_dsum)
        .with("mu_bt", mu)
        .with("sigma_bt", sd)
        .with("block_length", plan.block_length as f64)
        .with("bootstrap_reps", draws.len() as f64))
}

/// Long-run variances `sigma^_i` of every coordinate; errors on the first
/// nonpositive one.
pub fn long_run_variances(fit: &SieveFit, cfg: LrvConfig) -> Result<Vec<f64>> {
    cfg.validate_for(fit.dims.periods)?;
    fit.residuals
        .column_iter()
        .enumerate()
        .map(|(i, col)| {
            let v = lrv_bartlett(col.as_slice(), &fit.eta, cfg)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::DegenerateLongRunVariance { index: i, value: v })
            }
        })
        .collect()
}

/// `max_i T delta^_i^2 / sigma^_i` and its argmax.
pub fn dmax_statistic(fit: &SieveFit, cfg: LrvConfig) -> Result<(f64, usize)> {
    let sigmas = long_run_variances(fit, cfg)?;
    let t = fit.dims.periods as f64;
    Ok(fit
        .delta_hat
        .iter()
        .zip(&sigmas)
        .map(|(d, s)| t * d * d / s)
        .enumerate()
        .fold((f64::NEG_INFINITY, 0), |acc, (i, v)| if v > acc.0 { (v, i) } else { acc }))
}

/// `(1 + #{Q* >= Q}) / (B + 1)`.
pub fn bootstrap_p_value(observed: f64, draws: &[f64]) -> f64 {
    let exceed = draws.iter().filter(|&&q| q >= observed).count();
    (1 + exceed) as f64 / (draws.len() + 1) as f64
}

fn dmax_outcome(
    fit: &SieveFit,
    cfg: LrvConfig,
    plan: &BootstrapPlan,
    calibration: MaxCalibration,
    draws: Option<&[f64]>,
) -> Result<TestOutcome> {
    let n = fit.dims.assets;
    let (q, argmax) = dmax_statistic(fit, cfg)?;
    let centered = q - if n >= 3 { gumbel_centering(n) } else { f64::NAN };
    let out = match calibration {
        MaxCalibration::Gumbel => {
            require_gumbel_dim(n)?;
            TestOutcome::new(TestName::Dmax, q, gumbel_sf(centered), Calibration::Gumbel)
        }
        MaxCalibration::Bootstrap => {
            let draws = draws.ok_or_else(|| Error::Plan("bootstrap draws of the max statistic are missing".into()))?;
            TestOutcome::new(TestName::Dmax, q, bootstrap_p_value(q, draws), Calibration::Bootstrap)
                .with("block_length", plan.block_length as f64)
                .with("bootstrap_reps", draws.len() as f64)
        }
    };
    let out = out.with("bandwidth", cfg.bandwidth as f64).with("argmax", argmax as f64);
    Ok(if n >= 3 { out.with("centered_statistic", centered) } else { out })
}

pub fn dsum_test(fit: &SieveFit, plan: &BootstrapPlan) -> Result<TestOutcome> {
    let score = score_process(fit);
    let pool = bootstrap_pool(&score, plan, None)?;
    dsum_from_pool(fit, plan, &pool.sum)
}

pub fn dmax_test(fit: &SieveFit, cfg: LrvConfig, plan: &BootstrapPlan, calibration: MaxCalibration) -> Result<TestOutcome> {
    match calibration {
        MaxCalibration::Gumbel => dmax_outcome(fit, cfg, plan, calibration, None),
        MaxCalibration::Bootstrap => {
            // Check the observed statistic before paying for the resamples.
            long_run_variances(fit, cfg)?;
            let pool = bootstrap_pool(&score_process(fit), plan, Some(cfg))?;
            dmax_outcome(fit, cfg, plan, calibration, pool.max.as_deref())
        }
    }
}

pub fn dcc_test(p_dsum: f64, p_dmax: f64) -> Result<TestOutcome> {
    combine_pair(TestName::Dcc, p_dsum, p_dmax)
}

/// DSUM, DMAX (bootstrap-calibrated) and DCC from one shared resample pool.
pub fn dependent_battery(fit: &SieveFit, cfg: LrvConfig, plan: &BootstrapPlan) -> Result<[TestOutcome; 3]> {
    long_run_variances(fit, cfg)?;
    let pool = bootstrap_pool(&score_process(fit), plan, Some(cfg))?;
    let dsum = dsum_from_pool(fit, plan, &pool.sum)?;
    let dmax = dmax_outcome(fit, cfg, plan, MaxCalibration::Bootstrap, pool.max.as_deref())?;
    let dcc = dcc_test(dsum.p_value, dmax.p_value)?;
    Ok([dsum, dmax, dcc])
}
