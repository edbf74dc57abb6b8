//! Normalized B-spline bases on a clamped uniform knot vector and the sieve
//! design matrix built from them.
//!
//! Row `t` of the design is
//! `(B~(t/T)', f_t1 B(t/T)', ..., f_td B(t/T)')` where `B~` is the basis
//! centered over the evaluation grid `t/T, t = 1..T`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::FactorSeries;

/// Spline space of order `q` (degree `q - 1`) with `p` interior knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplineConfig {
    pub order: usize,
    pub interior_knots: usize,
}

impl Default for SplineConfig {
    /// Cubic splines with basis dimension 5.
    fn default() -> Self {
        Self {
            order: 4,
            interior_knots: 1,
        }
    }
}

impl SplineConfig {
    pub fn new(order: usize, interior_knots: usize) -> Result<Self> {
        let cfg = Self {
            order,
            interior_knots,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config for a given order and total basis dimension `L = p + q`.
    pub fn with_basis_dim(order: usize, basis_dim: usize) -> Result<Self> {
        if basis_dim < order {
            return Err(Error::Config(format!(
                "basis dimension {basis_dim} is smaller than the spline order {order}"
            )));
        }
        Self::new(order, basis_dim - order)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::Config(format!(
                "spline order must be at least 2, got {}",
                self.order
            )));
        }
        Ok(())
    }

    pub fn basis_dim(&self) -> usize {
        self.order + self.interior_knots
    }

    pub fn degree(&self) -> usize {
        self.order - 1
    }

    /// Clamped knot vector: `q` zeros, interior knots `k/(p+1)`, `q` ones.
    pub fn knots(&self) -> Vec<f64> {
        let q = self.order;
        let p = self.interior_knots;
        let mut knots = Vec::with_capacity(p + 2 * q);
        knots.extend(std::iter::repeat_n(0.0, q));
        knots.extend((1..=p).map(|k| k as f64 / (p + 1) as f64));
        knots.extend(std::iter::repeat_n(1.0, q));
        knots
    }

    /// Evaluates all `L` basis functions at `u` in `[0, 1]`.
    pub fn evaluate(&self, u: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.basis_dim()];
        let knots = self.knots();
        let (first, local) = nonzero_basis(&knots, self.degree(), self.basis_dim(), u);
        out[first..first + local.len()].copy_from_slice(&local);
        out
    }
}

/// Index of the knot span containing `u` (clamped to the last nonempty span).
fn find_span(knots: &[f64], degree: usize, n_basis: usize, u: f64) -> usize {
    let last = n_basis - 1;
    if u >= knots[last + 1] {
        return last;
    }
    if u <= knots[degree] {
        return degree;
    }
    let mut lo = degree;
    let mut hi = last + 1;
    // knots[lo] <= u < knots[hi]
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if u < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Triangular Cox-de Boor evaluation of the `degree + 1` basis functions that
/// are nonzero at `u`. Returns the index of the first one and their values.
fn nonzero_basis(knots: &[f64], degree: usize, n_basis: usize, u: f64) -> (usize, Vec<f64>) {
    let span = find_span(knots, degree, n_basis, u);
    let mut values = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    values[0] = 1.0;
    for j in 1..=degree {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { values[r] / denom };
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    (span - degree, values)
}

/// Basis values on the grid `u_t = t/T`, `t = 1..T`.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub grid: Vec<f64>,
    /// T x L matrix `B(u_t)`.
    pub values: DMatrix<f64>,
    /// T x L matrix `B(u_t) - mean_s B(u_s)`.
    pub centered: DMatrix<f64>,
    pub config: SplineConfig,
}

impl BasisEval {
    pub fn periods(&self) -> usize {
        self.grid.len()
    }

    pub fn basis_dim(&self) -> usize {
        self.values.ncols()
    }
}

pub fn build_basis(periods: usize, cfg: SplineConfig) -> Result<BasisEval> {
    cfg.validate()?;
    if periods == 0 {
        return Err(Error::Config("basis needs at least one period".into()));
    }
    let l = cfg.basis_dim();
    let knots = cfg.knots();
    let grid: Vec<f64> = (1..=periods).map(|t| t as f64 / periods as f64).collect();
    let mut values = DMatrix::zeros(periods, l);
    for (t, &u) in grid.iter().enumerate() {
        let (first, local) = nonzero_basis(&knots, cfg.degree(), l, u);
        for (k, v) in local.into_iter().enumerate() {
            values[(t, first + k)] = v;
        }
    }
    let mut centered = values.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(BasisEval {
        grid,
        values,
        centered,
        config: cfg,
    })
}

/// Sieve design `Z` (T x (d+1)L).
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub z: DMatrix<f64>,
    pub factors: usize,
    pub basis_dim: usize,
}

impl DesignMatrix {
    pub fn periods(&self) -> usize {
        self.z.nrows()
    }

    /// `(d+1)L`.
    pub fn width(&self) -> usize {
        self.z.ncols()
    }

    /// The design with the last centered-basis column removed.
    ///
    /// Normalized B-splines sum to one at every point, so the centered columns
    /// sum to zero and `Z` always has rank at most `(d+1)L - 1`. Dropping one
    /// centered column leaves the column space, and hence every projection,
    /// unchanged.
    pub fn reduced(&self) -> DMatrix<f64> {
        self.z.clone().remove_column(self.basis_dim - 1)
    }
}

pub fn build_design(basis: &BasisEval, factors: &FactorSeries) -> Result<DesignMatrix> {
    let t_len = basis.periods();
    if factors.periods() != t_len {
        return Err(Error::Dimension(format!(
            "factor series has {} rows but the basis grid has {}",
            factors.periods(),
            t_len
        )));
    }
    let l = basis.basis_dim();
    let d = factors.count();
    let mut z = DMatrix::zeros(t_len, (d + 1) * l);
    z.columns_mut(0, l).copy_from(&basis.centered);
    for j in 0..d {
        for k in 0..l {
            let col = (j + 1) * l + k;
            for t in 0..t_len {
                z[(t, col)] = factors.values[(t, j)] * basis.values[(t, k)];
            }
        }
    }
    Ok(DesignMatrix {
        z,
        factors: d,
        basis_dim: l,
    })
}
