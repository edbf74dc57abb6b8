//! Cauchy combination of p-values.
//!
//! `T = sum_i w_i tan(pi (1/2 - p_i))`, combined p-value `1 - G(T)` with `G` the
//! standard Cauchy CDF. Inputs are clamped to `[eps, 1 - eps]` so the tangent
//! stays finite.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::outcome::{Calibration, TestName, TestOutcome};

pub const CLAMP_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyCombine {
    weights: Vec<f64>,
    eps: f64,
}

impl CauchyCombine {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            weights,
            eps: CLAMP_EPS,
        })
    }

    /// Equal weights over `k` inputs.
    pub fn equal(k: usize) -> Self {
        Self {
            weights: vec![1.0 / k as f64; k],
            eps: CLAMP_EPS,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Returns `(statistic, combined p-value)`.
    pub fn combine(&self, p_values: &[f64]) -> Result<(f64, f64)> {
        if p_values.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "{} p-values for {} weights",
                p_values.len(),
                self.weights.len()
            )));
        }
        let mut stat = 0.0;
        for (&p, &w) in p_values.iter().zip(&self.weights) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("p-value {p} outside [0, 1]")));
            }
            let p = p.clamp(self.eps, 1.0 - self.eps);
            stat += w * (PI * (0.5 - p)).tan();
        }
        Ok((stat, cauchy_sf(stat)))
    }
}

/// `1 - G(x)` for the standard Cauchy law.
pub fn cauchy_sf(x: f64) -> f64 {
    // 1/2 - atan(x)/pi loses precision for large x; atan(1/x)/pi does not.
    if x > 1.0 {
        (1.0 / x).atan() / PI
    } else {
        0.5 - x.atan() / PI
    }
}

/// Equal-weight combination of two p-values, reported under `name`.
pub(crate) fn combine_pair(name: TestName, p_sum: f64, p_max: f64) -> Result<TestOutcome> {
    let (stat, p) = CauchyCombine::equal(2).combine(&[p_sum, p_max])?;
    Ok(TestOutcome::new(name, stat, p, Calibration::Cauchy)
        .with("p_sum", p_sum)
        .with("p_max", p_max))
}
