//! Benchmarks calibrated under serial independence: the standardized sum
//! statistic with analytic centering and scaling, the Studentized max
//! statistic with its Gumbel limit, and their Cauchy combination.

use nalgebra::DMatrix;

use crate::combination::combine_pair;
use crate::dist::{gumbel_centering, gumbel_sf, normal_sf};
use crate::error::{Error, Result};
use crate::outcome::{Calibration, TestName, TestOutcome};
use crate::projection::SieveFit;

/// Bias-corrected estimate of `tr(Sigma^2)`:
///
/// `T^2 / ((T+k-1)(T-k)) * [tr(S^2) - tr(S)^2 / (T-k)]`, `k = (d+1)L`.
pub fn trace_sigma2_hat(sigma_hat: &DMatrix<f64>, periods: usize, basis_dim: usize, factors: usize) -> Result<f64> {
    let k = (factors + 1) * basis_dim;
    if periods <= k {
        return Err(Error::DegenerateDegrees { t: periods, k });
    }
    let t = periods as f64;
    let k = k as f64;
    let tr = sigma_hat.trace();
    // tr(S^2) for symmetric S is its squared Frobenius norm.
    let tr_sq = sigma_hat.norm_squared();
    Ok(t * t / ((t + k - 1.0) * (t - k)) * (tr_sq - tr * tr / (t - k)))
}

pub fn sum_test_indep(fit: &SieveFit) -> Result<TestOutcome> {
    let dims = fit.dims;
    let n = dims.assets as f64;
    let t = dims.periods as f64;
    let e = &fit.residuals;

    let s_nt = e.column_iter().map(|c| c.sum().powi(2)).sum::<f64>() / (n * t);
    let h2 = fit.h.map(|v| v * v);
    let mu = e
        .column_iter()
        .map(|c| c.iter().zip(h2.iter()).map(|(x, w)| x * x * w).sum::<f64>())
        .sum::<f64>()
        / (n * t);
    let tr2 = trace_sigma2_hat(&fit.sigma_hat(), dims.periods, dims.basis_dim, dims.factors)?;
    // sum_{t != s} h_t^2 h_s^2
    let cross = h2.sum().powi(2) - h2.iter().map(|v| v * v).sum::<f64>();
    let var = 2.0 / (n * n * t * t) * tr2 * cross;
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance {
            test: "SUM",
            detail: format!("sigma_NT^2 = {var:.3e}"),
        });
    }
    let sd = var.sqrt();
    let q = (s_nt - mu) / sd;
    Ok(TestOutcome::new(TestName::Sum, q, normal_sf(q), Calibration::AnalyticNormal)
        .with("s_nt", s_nt)
        .with("mu_nt", mu)
        .with("sigma_nt", sd)
        .with("trace_sigma2_hat", tr2))
}

/// Squared Studentized statistics `t_i^2 = kappa^2 delta_i^2 / (T sigma_ii)`
/// with `sigma_ii = e_i'e_i / (T - d - 1)`.
pub fn studentized_squares(fit: &SieveFit) -> Result<Vec<f64>> {
    let dims = fit.dims;
    if dims.periods <= dims.factors + 1 {
        return Err(Error::DegenerateDegrees {
            t: dims.periods,
            k: dims.factors + 1,
        });
    }
    let dof = (dims.periods - dims.factors - 1) as f64;
    let t = dims.periods as f64;
    fit.residuals
        .column_iter()
        .zip(fit.delta_hat.iter())
        .enumerate()
        .map(|(i, (col, &delta))| {
            let s_ii = col.norm_squared() / dof;
            if !(s_ii > 0.0) {
                return Err(Error::DegenerateVariance {
                    test: "MAX",
                    detail: format!("sigma_ii = {s_ii:.3e} for asset {i}"),
                });
            }
            Ok((fit.kappa * delta).powi(2) / (t * s_ii))
        })
        .collect()
}

pub(crate) fn require_gumbel_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Domain(format!(
            "Gumbel calibration needs at least 3 assets (log log N > 0), got {n}"
        )));
    }
    Ok(())
}

pub fn max_test_indep(fit: &SieveFit) -> Result<TestOutcome> {
    let n = fit.dims.assets;
    require_gumbel_dim(n)?;
    let t2 = studentized_squares(fit)?;
    let (argmax, q) = t2
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let centered = q - gumbel_centering(n);
    Ok(TestOutcome::new(TestName::Max, q, gumbel_sf(centered), Calibration::Gumbel)
        .with("centered_statistic", centered)
        .with("argmax", argmax as f64))
}

pub fn cc_indep(p_sum: f64, p_max: f64) -> Result<TestOutcome> {
    combine_pair(TestName::Cc, p_sum, p_max)
}

/// The three independence-calibrated tests on one fit.
pub fn classical_battery(fit: &SieveFit) -> Result<[TestOutcome; 3]> {
    let sum = sum_test_indep(fit)?;
    let max = max_test_indep(fit)?;
    let cc = cc_indep(sum.p_value, max.p_value)?;
    Ok([sum, max, cc])
}
