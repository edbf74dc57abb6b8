//! Data-driven block length for the circular block bootstrap.
//!
//! Each residual series gets the Politis-White flat-top spectral
//! recommendation for the circular bootstrap (with the Patton-Politis-White
//! constants); the panel block length is
//! `max(2, min(floor(sqrt T), ceil(1.5 * median_i b_i)))`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Band multiplier for the autocorrelation scan.
pub const BAND_CONSTANT: f64 = 2.0;

/// Smallest series length accepted by [`pwsd_per_series`].
pub const MIN_SERIES_LENGTH: usize = 20;

/// Trapezoidal flat-top taper.
fn flat_top(t: f64) -> f64 {
    let a = t.abs();
    if a <= 0.5 {
        1.0
    } else if a <= 1.0 {
        2.0 * (1.0 - a)
    } else {
        0.0
    }
}

/// Number of consecutive insignificant autocorrelations required.
pub fn consecutive_lags(n: usize) -> usize {
    ((n as f64).log10().sqrt().ceil() as usize).max(5)
}

/// Circular-bootstrap block length recommendation for one series.
pub fn pwsd_per_series(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < MIN_SERIES_LENGTH {
        return Err(Error::Domain(format!(
            "block-length selection needs at least {MIN_SERIES_LENGTH} observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let autocov = |k: usize| -> f64 {
        centered[k..].iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>() / nf
    };
    let r0 = autocov(0);
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(r0 > (scale * 1e-12).powi(2)) {
        return Err(Error::DegenerateSeries("series has zero sample variance".into()));
    }

    let k_n = consecutive_lags(n);
    let root = nf.sqrt().ceil() as usize;
    let m_max = (root + k_n).min(n - 1);
    let crit = BAND_CONSTANT * (nf.log10() / nf).sqrt();
    // rho[k - 1] is the lag-k autocorrelation
    let rho: Vec<f64> = (1..=m_max).map(|k| autocov(k) / r0).collect();
    let inside: Vec<bool> = rho.iter().map(|r| r.abs() < crit).collect();

    let run_start = (1..=m_max.saturating_sub(k_n) + 1)
        .find(|&j| j + k_n - 1 <= m_max && inside[j - 1..j - 1 + k_n].iter().all(|&b| b));
    let m_hat = match run_start {
        Some(j) => j,
        None => (1..=m_max).rev().find(|&k| !inside[k - 1]).unwrap_or(1),
    };
    let big_m = (2 * m_hat).min(m_max);

    let mut g = autocov(0);
    let mut g_weighted = 0.0;
    for k in 1..=big_m {
        let w = flat_top(k as f64 / big_m as f64);
        let r = autocov(k);
        g += 2.0 * w * r;
        g_weighted += 2.0 * w * k as f64 * r;
    }
    let d_circ = 4.0 / 3.0 * g * g;
    let upper = (root + k_n) as f64;
    let b = (2.0 * g_weighted * g_weighted / d_circ).cbrt() * nf.cbrt();
    let b = if b.is_finite() {
        b
    } else if g_weighted != 0.0 {
        upper
    } else {
        1.0
    };
    Ok(b.clamp(1.0, upper))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLengthReport {
    /// Recommendation per series; `None` where selection failed.
    pub per_series: Vec<Option<f64>>,
    pub skipped: usize,
    pub median: f64,
    pub selected: usize,
    pub cap: usize,
    pub floor: usize,
}

/// `max(2, min(floor(sqrt T), ceil(1.5 * median)))`.
pub fn block_length_rule(periods: usize, median: f64) -> usize {
    let cap = (periods as f64).sqrt().floor() as usize;
    let raw = (1.5 * median).ceil();
    let raw = if raw.is_nan() || raw <= 0.0 {
        0
    } else if raw.is_finite() {
        raw as usize
    } else {
        usize::MAX
    };
    raw.min(cap).max(2)
}

/// Lower median.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

/// Selects the panel block length from a T x N centered residual matrix.
pub fn select_block_length(e0: &DMatrix<f64>) -> Result<BlockLengthReport> {
    if e0.ncols() == 0 {
        return Err(Error::Selection("no series to select from".into()));
    }
    let periods = e0.nrows();
    let per_series: Vec<Option<f64>> = (0..e0.ncols())
        .into_par_iter()
        .map(|i| pwsd_per_series(e0.column(i).as_slice()).ok())
        .collect();
    let ok: Vec<f64> = per_series.iter().flatten().copied().collect();
    let skipped = per_series.len() - ok.len();
    if skipped > 0 {
        log::warn!("block-length selection skipped {skipped} degenerate series");
    }
    let median = lower_median(&ok)
        .ok_or_else(|| Error::Selection("every series failed block-length selection".into()))?;
    Ok(BlockLengthReport {
        per_series,
        skipped,
        median,
        selected: block_length_rule(periods, median),
        cap: (periods as f64).sqrt().floor() as usize,
        floor: 2,
    })
}
