//! Bartlett-kernel long-run variance of a weighted score series.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LrvConfig {
    /// Bartlett bandwidth `M`; lags `|h| >= M` get zero weight.
    pub bandwidth: usize,
}

impl LrvConfig {
    pub fn new(bandwidth: usize) -> Result<Self> {
        if bandwidth == 0 {
            return Err(Error::Config("bandwidth must be at least 1".into()));
        }
        Ok(Self { bandwidth })
    }

    pub fn validate_for(&self, periods: usize) -> Result<()> {
        if self.bandwidth == 0 || self.bandwidth >= periods {
            return Err(Error::Config(format!(
                "bandwidth {} must satisfy 1 <= M < T = {periods}",
                self.bandwidth
            )));
        }
        Ok(())
    }
}

/// `omega(x) = (1 - |x|) 1{|x| <= 1}`.
pub fn bartlett(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0 - a
    } else {
        0.0
    }
}

/// Default bandwidth `max(2, floor(1.2 T^{1/3}))`, capped at `floor(T/4)`.
pub fn default_bandwidth(periods: usize) -> usize {
    let raw = (1.2 * (periods as f64).cbrt()).floor() as usize;
    raw.max(2).min((periods / 4).max(1))
}

/// Lag-`h` product average `(T-h)^{-1} sum_{t>h} x_t x_{t-h}`.
#[inline]
fn lag_product(x: &[f64], h: usize) -> f64 {
    let n = x.len();
    let s: f64 = x[h..].iter().zip(&x[..n - h]).map(|(a, b)| a * b).sum();
    s / (n - h) as f64
}

/// `phi^_h = (T-h)^{-1} sum_{t>h} e_t e_{t-h} eta_t eta_{t-h}`.
pub fn weighted_autocovariance(residual: &[f64], eta: &DVector<f64>, lag: usize) -> Result<f64> {
    if residual.len() != eta.len() {
        return Err(Error::Dimension(format!(
            "residual length {} vs eta length {}",
            residual.len(),
            eta.len()
        )));
    }
    if lag >= residual.len() {
        return Err(Error::Domain(format!("lag {lag} needs more than {} periods", residual.len())));
    }
    let x: Vec<f64> = residual.iter().zip(eta.iter()).map(|(e, w)| e * w).collect();
    Ok(lag_product(&x, lag))
}

/// Bartlett long-run variance of an already weighted series `x_t`.
pub fn lrv_series(x: &[f64], bandwidth: usize) -> f64 {
    let m = bandwidth as f64;
    let mut acc = lag_product(x, 0);
    for h in 1..bandwidth.min(x.len()) {
        acc += 2.0 * bartlett(h as f64 / m) * lag_product(x, h);
    }
    acc
}

/// `sigma^_i = sum_{|h|<=M} omega(h/M) phi^_{i,h}` with
/// `phi^_{i,h} = (T-|h|)^{-1} sum_t e_t e_{t-|h|} eta_t eta_{t-|h|}`.
///
/// The value is returned as is; callers decide how to treat `<= 0`.
pub fn lrv_bartlett(residual: &[f64], eta: &DVector<f64>, cfg: LrvConfig) -> Result<f64> {
    if residual.len() != eta.len() {
        return Err(Error::Dimension(format!(
            "residual length {} vs eta length {}",
            residual.len(),
            eta.len()
        )));
    }
    cfg.validate_for(residual.len())?;
    let x: Vec<f64> = residual.iter().zip(eta.iter()).map(|(e, w)| e * w).collect();
    Ok(lrv_series(&x, cfg.bandwidth))
}
