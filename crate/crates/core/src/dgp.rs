//! Simulation designs: AR(1)-GARCH(1,1) factors, logistic time-varying
//! loadings, cross-sectionally and serially dependent errors, and sparse
//! time-varying alpha alternatives.
//!
//! All processes with memory run over `T + 25` periods and the first 25 are
//! discarded; alpha and beta paths use the post-burn-in clock `t = 1..T`.
//! Draws happen in a fixed order (factors, errors, alpha) from a single
//! stream, so a seed determines the whole panel.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{FactorSeries, ReturnPanel};
use crate::spline::SplineConfig;

pub const BURN_IN: usize = 25;

/// Smallest eigenvalue of the error covariance tolerated before clipping.
pub const EIGEN_TOLERANCE: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Example {
    /// Conditional CAPM with one factor.
    One,
    /// Conditional three-factor model.
    ThreeFactor,
}

impl Example {
    pub fn factor_count(&self) -> usize {
        match self {
            Example::One => 1,
            Example::ThreeFactor => 3,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Example::One => "one",
            Example::ThreeFactor => "three-factor",
        }
    }
}

/// One factor: `f_t = mu + phi (f_{t-1} - mu) + sqrt(h_t) eps_t`,
/// `h_t = a + b h_{t-1} + c xi_{t-1}^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    pub mu: f64,
    pub phi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FactorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || self.b < 0.0 || self.c < 0.0 {
            return Err(Error::Config(format!(
                "GARCH coefficients must satisfy a > 0, b >= 0, c >= 0: {self:?}"
            )));
        }
        if self.b + self.c >= 1.0 {
            return Err(Error::Config(format!(
                "nonstationary GARCH: b + c = {} >= 1",
                self.b + self.c
            )));
        }
        Ok(())
    }

    /// Parameters used by each example.
    pub fn for_example(example: Example) -> Vec<FactorParams> {
        match example {
            Example::One => vec![FactorParams {
                mu: 0.34,
                phi: 0.05,
                a: 0.32,
                b: 0.67,
                c: 0.13,
            }],
            Example::ThreeFactor => vec![
                FactorParams {
                    mu: 0.34,
                    phi: 0.05,
                    a: 0.32,
                    b: 0.67,
                    c: 0.13,
                },
                FactorParams {
                    mu: 0.04,
                    phi: 0.07,
                    a: 0.33,
                    b: 0.51,
                    c: 0.03,
                },
                FactorParams {
                    mu: 0.06,
                    phi: 0.04,
                    a: 0.26,
                    b: 0.72,
                    c: 0.05,
                },
            ],
        }
    }
}

/// Which shock drives the GARCH variance recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GarchShock {
    /// A separate standard normal `xi_t`, independent of the return shock.
    #[default]
    Independent,
    /// The factor's own shock `sqrt(h_t) eps_t` (textbook GARCH).
    ReturnShock,
}

/// Factor series over `periods + BURN_IN` steps with the burn-in dropped.
///
/// Starts from `f_0 = mu`, `h_0 = a / (1 - b - c)` and a standard normal `xi_0`.
pub fn gen_factors<R: Rng + ?Sized>(
    params: &[FactorParams],
    periods: usize,
    shock: GarchShock,
    rng: &mut R,
) -> Result<FactorSeries> {
    for p in params {
        p.validate()?;
    }
    let total = periods + BURN_IN;
    let mut values = DMatrix::zeros(periods, params.len());
    for (j, p) in params.iter().enumerate() {
        let mut f = p.mu;
        let mut h = p.a / (1.0 - p.b - p.c);
        let xi0: f64 = rng.sample(StandardNormal);
        let mut prev_shock = match shock {
            GarchShock::Independent => xi0,
            GarchShock::ReturnShock => h.sqrt() * xi0,
        };
        for t in 0..total {
            h = p.a + p.b * h + p.c * prev_shock * prev_shock;
            let eps: f64 = rng.sample(StandardNormal);
            f = p.mu + p.phi * (f - p.mu) + h.sqrt() * eps;
            prev_shock = match shock {
                GarchShock::Independent => rng.sample(StandardNormal),
                GarchShock::ReturnShock => h.sqrt() * eps,
            };
            if t >= BURN_IN {
                values[(t - BURN_IN, j)] = f;
            }
        }
    }
    let mut series = FactorSeries::from_matrix(values);
    if params.len() == 3 {
        series.names = vec!["MKT".into(), "SMB".into(), "HML".into()];
    }
    Ok(series)
}

/// `{1 + exp[-2(10u - 2)]}^{-1}`.
pub fn logistic_path(u: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * (10.0 * u - 2.0)).exp())
}

/// Loadings `beta_j(t/T)` as a T x d matrix; every asset shares them.
pub fn beta_paths(example: Example, periods: usize) -> DMatrix<f64> {
    let z = |t: usize| logistic_path((t + 1) as f64 / periods as f64);
    match example {
        Example::One => DMatrix::from_fn(periods, 1, |t, _| z(t)),
        Example::ThreeFactor => {
            let slopes = [0.5, 0.1, 0.2];
            DMatrix::from_fn(periods, 3, |t, j| 0.5 + slopes[j] * z(t))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dependence {
    /// Serially independent errors (`M = 0`).
    #[serde(rename = "0")]
    Independent,
    /// Two-lag moving average (`M = 2`).
    #[serde(rename = "2")]
    Short,
    /// Moving average of order `T - 1`.
    #[serde(rename = "T-1")]
    Long,
}

impl Dependence {
    /// Moving-average order for a sample of `periods` observations.
    pub fn order(&self, periods: usize) -> usize {
        match self {
            Dependence::Independent => 0,
            Dependence::Short => 2,
            Dependence::Long => periods.saturating_sub(1),
        }
    }

    /// Signal constant `c_M` of the alternative design.
    pub fn signal_constant(&self) -> f64 {
        match self {
            Dependence::Independent => 12.0,
            Dependence::Short => 80.0,
            Dependence::Long => 90.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Dependence::Independent => "0",
            Dependence::Short => "2",
            Dependence::Long => "T-1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Innovation {
    Gaussian,
    /// `t(6) / sqrt(6/4)`, unit variance.
    T6,
}

impl Innovation {
    pub fn label(&self) -> &'static str {
        match self {
            Innovation::Gaussian => "gaussian",
            Innovation::T6 => "t6",
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, chi: &ChiSquared<f64>) -> f64 {
        match self {
            Innovation::Gaussian => rng.sample(StandardNormal),
            Innovation::T6 => {
                let z: f64 = rng.sample(StandardNormal);
                let w = chi.sample(rng);
                z / (w / 6.0).sqrt() / 1.5f64.sqrt()
            }
        }
    }
}

/// `(omega, phi1, phi2)` of the covariance and moving-average matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCoefficients {
    pub omega: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl Default for ErrorCoefficients {
    fn default() -> Self {
        Self {
            omega: 0.9,
            phi1: 0.6,
            phi2: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorParams {
    pub assets: usize,
    pub coefficients: ErrorCoefficients,
    pub dependence: Dependence,
    pub innovation: Innovation,
}

impl ErrorParams {
    fn band(&self, i: usize, j: usize) -> Option<f64> {
        let gap = i.abs_diff(j);
        (gap >= 1 && gap as f64 <= self.coefficients.omega * self.assets as f64).then_some(gap as f64)
    }

    /// `sigma_ii = 1`, `sigma_ij = phi2 / |i-j|^2` inside the band.
    pub fn sigma(&self) -> DMatrix<f64> {
        let phi2 = self.coefficients.phi2;
        DMatrix::from_fn(self.assets, self.assets, |i, j| {
            if i == j {
                1.0
            } else {
                self.band(i, j).map_or(0.0, |g| phi2 / (g * g))
            }
        })
    }

    /// Moving-average matrix `A_h`, `h >= 1`.
    pub fn ma_matrix(&self, h: usize) -> DMatrix<f64> {
        let n = self.assets;
        if h >= 3 {
            return DMatrix::identity(n, n) * (-2.0 * h as f64).exp();
        }
        let phi1 = self.coefficients.phi1;
        let hf = h as f64;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                phi1 / hf
            } else {
                self.band(i, j).map_or(0.0, |g| phi1 / (hf * g * g))
            }
        })
    }
}

/// Error generator with the covariance square root and MA matrices cached.
#[derive(Debug, Clone)]
pub struct ErrorGenerator {
    pub params: ErrorParams,
    sqrt_sigma: DMatrix<f64>,
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
}

/// Symmetric square root with eigenvalues clipped at zero.
pub fn symmetric_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(sigma.clone());
    let min = eig.eigenvalues.min();
    if min < EIGEN_TOLERANCE {
        return Err(Error::Covariance { min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let scaled = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    Ok(scaled * eig.eigenvectors.transpose())
}

impl ErrorGenerator {
    pub fn new(params: ErrorParams) -> Result<Self> {
        if params.assets == 0 {
            return Err(Error::Config("error process needs at least one asset".into()));
        }
        Ok(Self {
            sqrt_sigma: symmetric_sqrt(&params.sigma())?,
            a1: params.ma_matrix(1),
            a2: params.ma_matrix(2),
            params,
        })
    }

    /// `total` x N errors `e_t = z_t + sum_{h=1}^{M} A_h z_{t-h}`, with
    /// `z_t = Sigma^{1/2} u_t` and `z_s = 0` before the first period.
    pub fn generate<R: Rng + ?Sized>(&self, total: usize, order: usize, rng: &mut R) -> DMatrix<f64> {
        let n = self.params.assets;
        let chi = ChiSquared::new(6.0).expect("valid dof");
        let draws: Vec<f64> = (0..n * total)
            .map(|_| self.params.innovation.draw(rng, &chi))
            .collect();
        // column t holds u_t
        let u = DMatrix::from_vec(n, total, draws);
        let z = &self.sqrt_sigma * u;
        let mut e = z.clone();
        if order >= 1 && total > 1 {
            let lagged = &self.a1 * z.columns(0, total - 1);
            let mut tail = e.columns_mut(1, total - 1);
            tail += lagged;
        }
        if order >= 2 && total > 2 {
            let lagged = &self.a2 * z.columns(0, total - 2);
            let mut tail = e.columns_mut(2, total - 2);
            tail += lagged;
        }
        for h in 3..=order.min(total.saturating_sub(1)) {
            let coef = (-2.0 * h as f64).exp();
            if coef == 0.0 {
                break;
            }
            for t in h..total {
                let src = z.column(t - h).clone_owned();
                e.column_mut(t).axpy(coef, &src, 1.0);
            }
        }
        e.transpose()
    }
}

/// Errors for `periods + BURN_IN` steps with the burn-in kept; callers drop it.
pub fn gen_errors<R: Rng + ?Sized>(params: ErrorParams, total: usize, order: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    Ok(ErrorGenerator::new(params)?.generate(total, order, rng))
}

/// Sparse time-varying alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaAlternative {
    pub sparsity: usize,
    /// Signal constant; defaults to the value tied to the dependence regime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_m: Option<f64>,
}

/// Relative amplitude of the cosine component.
pub const ALPHA_WIGGLE: f64 = 0.35;

/// T x N alpha matrix. On the support, `alpha_it = a + 0.35 |a| g_i(t/T)` with
/// `a = sqrt(c_M log N / (s T))` and `g_i` a random-frequency cosine centered
/// over the grid and scaled to unit variance; zero elsewhere.
pub fn gen_alpha<R: Rng + ?Sized>(sparsity: usize, c_m: f64, periods: usize, assets: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if sparsity > assets {
        return Err(Error::Config(format!(
            "sparsity {sparsity} exceeds the number of assets {assets}"
        )));
    }
    let mut alpha = DMatrix::zeros(periods, assets);
    if sparsity == 0 {
        return Ok(alpha);
    }
    let a = (c_m * (assets as f64).ln() / (sparsity * periods) as f64).sqrt();
    let support = index::sample(rng, assets, sparsity);
    for i in support.iter() {
        let freq = rng.random_range(PI / 2.0..=PI);
        let phase = rng.random_range(0.0..2.0 * PI);
        let mut g: Vec<f64> = (1..=periods)
            .map(|t| 2f64.sqrt() * (freq * t as f64 / periods as f64 + phase).cos())
            .collect();
        let mean = g.iter().sum::<f64>() / periods as f64;
        g.iter_mut().for_each(|v| *v -= mean);
        let sd = (g.iter().map(|v| v * v).sum::<f64>() / periods as f64).sqrt();
        if sd > 0.0 {
            g.iter_mut().for_each(|v| *v /= sd);
        }
        for (t, gv) in g.into_iter().enumerate() {
            alpha[(t, i)] = a + ALPHA_WIGGLE * a.abs() * gv;
        }
    }
    Ok(alpha)
}

fn default_replications() -> usize {
    500
}

fn default_bootstrap() -> usize {
    500
}

fn default_level() -> f64 {
    0.05
}

/// Declarative description of one Monte Carlo cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub example: Example,
    #[serde(rename = "T")]
    pub periods: usize,
    #[serde(rename = "N")]
    pub assets: usize,
    pub dependence: Dependence,
    pub innovation: Innovation,
    /// `None` simulates under the null.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<AlphaAlternative>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub spline: SplineConfig,
    /// Fixed block length; selected from the residuals when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_length: Option<usize>,
    /// Fixed Bartlett bandwidth; the default rule is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<usize>,
    #[serde(default)]
    pub garch_shock: GarchShock,
    #[serde(default)]
    pub coefficients: ErrorCoefficients,
}

impl ExperimentPlan {
    /// A null plan with desk-scale defaults.
    pub fn new(example: Example, periods: usize, assets: usize, dependence: Dependence, innovation: Innovation) -> Self {
        Self {
            example,
            periods,
            assets,
            dependence,
            innovation,
            alternative: None,
            replications: default_replications(),
            bootstrap_reps: default_bootstrap(),
            seed: 0,
            level: default_level(),
            spline: SplineConfig::default(),
            block_length: None,
            bandwidth: None,
            garch_shock: GarchShock::Independent,
            coefficients: ErrorCoefficients::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods == 0 || self.assets == 0 || self.replications == 0 || self.bootstrap_reps == 0 {
            return Err(Error::Config("T, N, replications and bootstrap_reps must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} outside (0, 1)", self.level)));
        }
        self.spline.validate()?;
        if let Some(alt) = &self.alternative {
            if alt.sparsity == 0 || alt.sparsity > self.assets {
                return Err(Error::Config(format!(
                    "sparsity {} must lie in 1..={}",
                    alt.sparsity, self.assets
                )));
            }
        }
        for p in FactorParams::for_example(self.example) {
            p.validate()?;
        }
        Ok(())
    }

    pub fn error_params(&self) -> ErrorParams {
        ErrorParams {
            assets: self.assets,
            coefficients: self.coefficients,
            dependence: self.dependence,
            innovation: self.innovation,
        }
    }

    /// Signal constant in effect for the alternative, if any.
    pub fn signal_constant(&self) -> Option<f64> {
        self.alternative
            .map(|alt| alt.c_m.unwrap_or_else(|| self.dependence.signal_constant()))
    }
}

/// A simulated panel with its components kept for inspection.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: ReturnPanel,
    pub factors: FactorSeries,
    pub alpha: DMatrix<f64>,
    pub betas: DMatrix<f64>,
    pub errors: DMatrix<f64>,
}

/// Simulator for one plan; the expensive covariance root is built once.
#[derive(Debug, Clone)]
pub struct PanelSimulator {
    plan: ExperimentPlan,
    errors: ErrorGenerator,
    factor_params: Vec<FactorParams>,
    betas: DMatrix<f64>,
}

impl PanelSimulator {
    pub fn new(plan: &ExperimentPlan) -> Result<Self> {
        plan.validate()?;
        Ok(Self {
            errors: ErrorGenerator::new(plan.error_params())?,
            factor_params: FactorParams::for_example(plan.example),
            betas: beta_paths(plan.example, plan.periods),
            plan: plan.clone(),
        })
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SimulatedPanel> {
        let plan = &self.plan;
        let periods = plan.periods;
        let factors = gen_factors(&self.factor_params, periods, plan.garch_shock, rng)?;
        let total = periods + BURN_IN;
        let errors = self
            .errors
            .generate(total, plan.dependence.order(periods), rng)
            .rows(BURN_IN, periods)
            .clone_owned();
        let alpha = match plan.alternative {
            Some(alt) => gen_alpha(
                alt.sparsity,
                plan.signal_constant().unwrap_or_default(),
                periods,
                plan.assets,
                rng,
            )?,
            None => DMatrix::zeros(periods, plan.assets),
        };
        // Loadings are common across assets, so the systematic part is one column.
        let systematic: Vec<f64> = (0..periods)
            .map(|t| {
                (0..factors.count())
                    .map(|j| self.betas[(t, j)] * factors.values[(t, j)])
                    .sum()
            })
            .collect();
        let mut returns = &alpha + &errors;
        for mut row_col in returns.column_iter_mut() {
            for (v, s) in row_col.iter_mut().zip(&systematic) {
                *v += s;
            }
        }
        Ok(SimulatedPanel {
            panel: ReturnPanel::from_matrix(returns),
            factors,
            alpha,
            betas: self.betas.clone(),
            errors,
        })
    }
}

pub fn simulate_panel<R: Rng + ?Sized>(plan: &ExperimentPlan, rng: &mut R) -> Result<(ReturnPanel, FactorSeries)> {
    let sim = PanelSimulator::new(plan)?.simulate(rng)?;
    Ok((sim.panel, sim.factors))
}
