//! Reference distributions used for calibration.

use std::f64::consts::PI;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// `1 - Phi(x)` for the standard normal.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_cdf(x: f64) -> f64 {
    normal_sf(-x)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Extreme-value law of the centered maximum of squared standardized
/// coordinates: `F(x) = exp(-pi^{-1/2} exp(-x/2))`.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x / 2.0).exp() / PI.sqrt()).exp()
}

/// `1 - F(x)`, accurate in the upper tail.
pub fn gumbel_sf(x: f64) -> f64 {
    -(-(-x / 2.0).exp() / PI.sqrt()).exp_m1()
}

pub fn gumbel_quantile(p: f64) -> f64 {
    -2.0 * (-PI.sqrt() * p.ln()).ln()
}

/// `2 log N - log log N`, the centering of the max statistic.
pub fn gumbel_centering(n: usize) -> f64 {
    let ln = (n as f64).ln();
    2.0 * ln - ln.ln()
}

/// Upper tail of the chi-square law with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}
