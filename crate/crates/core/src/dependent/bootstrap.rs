//! Circular moving-block bootstrap of the centered score process.
//!
//! A resample draws `k = ceil(T/l)` start indices uniformly from `0..T`,
//! concatenates the circular blocks `(X~_j, ..., X~_{j+l-1})` (indices mod T)
//! and truncates the result to `T` rows. Replication `b` always draws from the
//! stream derived from `(seed, b)`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub block_length: usize,
    pub replications: usize,
    pub seed: u64,
}

impl BootstrapPlan {
    pub fn new(block_length: usize, replications: usize, seed: u64) -> Result<Self> {
        let plan = Self {
            block_length,
            replications,
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_length < 2 {
            return Err(Error::Plan(format!(
                "block length must be at least 2, got {}",
                self.block_length
            )));
        }
        if self.replications == 0 {
            return Err(Error::Plan("at least one bootstrap replication is required".into()));
        }
        Ok(())
    }

    pub fn validate_for(&self, periods: usize) -> Result<()> {
        self.validate()?;
        if self.block_length > periods {
            return Err(Error::Plan(format!(
                "block length {} exceeds the sample size {periods}",
                self.block_length
            )));
        }
        Ok(())
    }

    pub fn block_count(&self, periods: usize) -> usize {
        periods.div_ceil(self.block_length)
    }
}

/// Draws the `k` block start indices (0-based) of one resample.
pub fn draw_starts<R: Rng + ?Sized>(periods: usize, plan: &BootstrapPlan, rng: &mut R) -> Vec<usize> {
    (0..plan.block_count(periods))
        .map(|_| rng.random_range(0..periods))
        .collect()
}

/// Source row of every resampled row, given the block starts.
pub fn resample_rows(periods: usize, block_length: usize, starts: &[usize]) -> Vec<usize> {
    let mut rows = Vec::with_capacity(periods);
    'outer: for &start in starts {
        for offset in 0..block_length {
            if rows.len() == periods {
                break 'outer;
            }
            rows.push((start + offset) % periods);
        }
    }
    rows
}

/// Copies the circular blocks of `column` starting at `starts` into `out`.
pub(crate) fn resample_column(column: &[f64], block_length: usize, starts: &[usize], out: &mut [f64]) {
    let periods = column.len();
    let mut pos = 0;
    for &start in starts {
        let len = block_length.min(periods - pos);
        let first = len.min(periods - start);
        out[pos..pos + first].copy_from_slice(&column[start..start + first]);
        if first < len {
            out[pos + first..pos + len].copy_from_slice(&column[..len - first]);
        }
        pos += len;
        if pos == periods {
            break;
        }
    }
}

pub fn circular_blocks_resample<R: Rng + ?Sized>(
    x_tilde: &DMatrix<f64>,
    plan: &BootstrapPlan,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let periods = x_tilde.nrows();
    plan.validate_for(periods)?;
    let starts = draw_starts(periods, plan, rng);
    let mut out = DMatrix::zeros(periods, x_tilde.ncols());
    for (src, mut dst) in x_tilde.column_iter().zip(out.column_iter_mut()) {
        resample_column(
            src.as_slice(),
            plan.block_length,
            &starts,
            dst.as_mut_slice(),
        );
    }
    Ok(out)
}

/// Circular prefix sums over two laps of one series, so any block sum is a
/// single difference.
pub(crate) struct CircularPrefix {
    sums: Vec<f64>,
}

impl CircularPrefix {
    pub(crate) fn new(column: &[f64]) -> Self {
        let mut sums = Vec::with_capacity(2 * column.len() + 1);
        let mut acc = 0.0;
        sums.push(acc);
        for &v in column.iter().chain(column) {
            acc += v;
            sums.push(acc);
        }
        Self { sums }
    }

    /// Sum of the resampled series built from `starts`.
    pub(crate) fn resampled_total(&self, block_length: usize, starts: &[usize]) -> f64 {
        let periods = (self.sums.len() - 1) / 2;
        let mut remaining = periods;
        let mut total = 0.0;
        for &start in starts {
            let len = block_length.min(remaining);
            total += self.sums[start + len] - self.sums[start];
            remaining -= len;
            if remaining == 0 {
                break;
            }
        }
        total
    }

    /// Sum of the circular block of `len` rows starting at `start`.
    pub(crate) fn block(&self, start: usize, len: usize) -> f64 {
        self.sums[start + len] - self.sums[start]
    }
}

/// Exact conditional mean `E*(||X-bar*||^2)` of the bootstrap sum statistic.
///
/// Block starts are independent and uniform and every circular block of a
/// centered series has mean zero, so cross terms vanish and the mean is
/// `T^{-2} sum_m E*||S_m||^2`, `S_m` being the sum over block `m` (the last
/// block may be truncated). Costs `O(N T k)`; meant for checks at small `N`.
pub fn exact_bootstrap_mean(x_tilde: &DMatrix<f64>, block_length: usize) -> Result<f64> {
    let periods = x_tilde.nrows();
    if block_length == 0 || block_length > periods {
        return Err(Error::Plan(format!(
            "block length {block_length} must lie in 1..={periods}"
        )));
    }
    let mut lengths = vec![block_length; periods / block_length];
    if !periods.is_multiple_of(block_length) {
        lengths.push(periods % block_length);
    }
    let t = periods as f64;
    let mut total = 0.0;
    for col in x_tilde.column_iter() {
        let prefix = CircularPrefix::new(col.as_slice());
        for &len in &lengths {
            let second: f64 = (0..periods).map(|j| prefix.block(j, len).powi(2)).sum::<f64>() / t;
            total += second;
        }
    }
    Ok(total / (t * t))
}
