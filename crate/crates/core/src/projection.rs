//! Null-restricted sieve regression.
//!
//! With `M_Z = I - Z(Z'Z)^{-1}Z'` the residual maker of the sieve design, the
//! fit produces `E^ = M_Z R`, `h = M_Z 1`, `kappa = 1'M_Z 1 = h'h`, the weights
//! `eta_t = h_t / (kappa / T)` and the average-alpha estimates
//! `delta^_i = 1'M_Z R_i / kappa`. `M_Z` itself is never formed: the projection
//! is applied through a thin QR factorization of the (reduced) design.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;
use crate::spline::DesignMatrix;

/// Largest accepted condition number of `Z'Z`.
pub const CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitDims {
    pub periods: usize,
    pub assets: usize,
    pub factors: usize,
    pub basis_dim: usize,
}

impl FitDims {
    /// `(d+1)L`.
    pub fn design_width(&self) -> usize {
        (self.factors + 1) * self.basis_dim
    }
}

/// Everything the test statistics consume from one sieve regression.
#[derive(Debug, Clone)]
pub struct SieveFit {
    /// T x N residuals `M_Z R`.
    pub residuals: DMatrix<f64>,
    /// `M_Z 1_T`.
    pub h: DVector<f64>,
    pub kappa: f64,
    /// `h_t T / kappa`.
    pub eta: DVector<f64>,
    pub delta_hat: DVector<f64>,
    pub dims: FitDims,
    /// Condition number of the reduced `Z'Z`.
    pub condition: f64,
}

impl SieveFit {
    /// Residuals centered over time, `e^_t - mean_s e^_s`.
    pub fn centered_residuals(&self) -> DMatrix<f64> {
        let mut out = self.residuals.clone();
        for mut col in out.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        out
    }

    /// `Sigma^ = T^{-1} sum_t (e^_t - e-bar)(e^_t - e-bar)'` (N x N, divisor T).
    pub fn sigma_hat(&self) -> DMatrix<f64> {
        let centered = self.centered_residuals();
        centered.tr_mul(&centered) / self.dims.periods as f64
    }
}

pub fn fit_sieve(panel: &ReturnPanel, design: &DesignMatrix) -> Result<SieveFit> {
    fit_returns(&panel.returns, design)
}

/// [`fit_sieve`] on a bare T x N return matrix.
pub fn fit_returns(returns: &DMatrix<f64>, design: &DesignMatrix) -> Result<SieveFit> {
    let t_len = returns.nrows();
    if design.periods() != t_len {
        return Err(Error::Dimension(format!(
            "returns have {} periods but the design has {}",
            t_len,
            design.periods()
        )));
    }
    if returns.ncols() == 0 {
        return Err(Error::Dimension("panel has no assets".into()));
    }
    let width = design.width();
    if t_len <= width {
        return Err(Error::DegenerateDegrees { t: t_len, k: width });
    }

    let z = design.reduced();
    let qr = z.qr();
    let r = qr.r();
    let singular = r.singular_values();
    let smax = singular.max();
    let smin = singular.min();
    let condition = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if !(condition <= CONDITION_CAP) {
        return Err(Error::SingularDesign {
            condition,
            cap: CONDITION_CAP,
        });
    }
    let q = qr.q();

    let residuals = returns - &q * q.tr_mul(returns);
    let ones = DVector::from_element(t_len, 1.0);
    let h = &ones - &q * q.tr_mul(&ones);
    let kappa = h.norm_squared();
    if kappa <= 1e-10 * t_len as f64 {
        return Err(Error::Domain(format!(
            "the constant vector lies in the sieve space (kappa = {kappa:.3e})"
        )));
    }
    let eta = &h * (t_len as f64 / kappa);
    let delta_hat = DVector::from_iterator(
        returns.ncols(),
        residuals.column_iter().map(|c| c.sum() / kappa),
    );

    Ok(SieveFit {
        residuals,
        h,
        kappa,
        eta,
        delta_hat,
        dims: FitDims {
            periods: t_len,
            assets: returns.ncols(),
            factors: design.factors,
            basis_dim: design.basis_dim,
        },
        condition,
    })
}

/// Projected-score process `X^_t = e^_t eta_t` and its centered version.
#[derive(Debug, Clone)]
pub struct ScoreProcess {
    /// T x N.
    pub x_hat: DMatrix<f64>,
    /// T x N, columnwise centered.
    pub x_tilde: DMatrix<f64>,
}

pub fn score_process(fit: &SieveFit) -> ScoreProcess {
    let mut x_hat = fit.residuals.clone();
    for mut col in x_hat.column_iter_mut() {
        col.component_mul_assign(&fit.eta);
    }
    let mut x_tilde = x_hat.clone();
    for mut col in x_tilde.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    ScoreProcess { x_hat, x_tilde }
}
