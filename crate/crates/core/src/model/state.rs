use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::covariance::MaternParams;
use crate::error::{domain, shape, Result};
use crate::model::spline::SplineBasis;

/// Problem sizes shared by the state, the data and the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub sites: usize,
    pub indexes: usize,
    pub splines: usize,
    pub times: usize,
}

impl Dims {
    /// Flat offset of `beta[site, index, spline]`.
    pub fn beta_at(&self, site: usize, index: usize, spline: usize) -> usize {
        (site * self.indexes + index) * self.splines + spline
    }

    /// Flat offset of `Y_t[site, index]`.
    pub fn y_at(&self, t: usize, site: usize, index: usize) -> usize {
        (t * self.sites + site) * self.indexes + index
    }
}

/// One state of the chain.
///
/// `beta` is stored site-slowest, then index, with the spline coefficient
/// fastest. `a` is `f64::INFINITY` for the Gaussian variant, in which case
/// `sigma2` and `z_abs` are held fixed at one and zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: Vec<f64>,
    pub mu_beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub z_abs: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub a: f64,
    pub sigma_i: DMatrix<f64>,
    pub sigma_b: DMatrix<f64>,
    pub matern: MaternParams,
}

impl ChainState {
    pub fn dims(&self) -> Dims {
        let indexes = self.mu_beta.len();
        let splines = self.sigma_b.nrows();
        let per_site = (indexes * splines).max(1);
        Dims { sites: self.beta.len() / per_site, indexes, splines, times: self.sigma2.len() }
    }

    /// Standardized skewness `λ_p / sqrt(Σ_I[p,p])`.
    pub fn lambda_star(&self, index: usize) -> f64 {
        self.lambda[index] / self.sigma_i[(index, index)].sqrt()
    }

    /// Checks shapes and parameter domains. `a_grid`, when given, is the set
    /// of admissible finite degrees of freedom.
    pub fn validate(&self, a_grid: Option<&[f64]>) -> Result<()> {
        let d = self.dims();
        if d.indexes == 0 || d.splines == 0 || d.sites == 0 {
            return Err(shape("empty state"));
        }
        if self.beta.len() != d.sites * d.indexes * d.splines {
            return Err(shape("beta length is not a multiple of P·L"));
        }
        if self.lambda.len() != d.indexes || self.sigma_i.shape() != (d.indexes, d.indexes) {
            return Err(shape("lambda and Σ_I must match the number of indexes"));
        }
        if self.sigma_b.shape() != (d.splines, d.splines) || self.z_abs.len() != d.times {
            return Err(shape("Σ_B or |z| has the wrong size"));
        }
        if let Some(t) = self.sigma2.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(domain(format!("σ² at time {t} is not positive: {}", self.sigma2[t])));
        }
        if let Some(t) = self.z_abs.iter().position(|&z| !(z >= 0.0 && z.is_finite())) {
            return Err(domain(format!("|z| at time {t} is negative: {}", self.z_abs[t])));
        }
        if !(self.a > 0.0) {
            return Err(domain(format!("degrees of freedom must be positive, got {}", self.a)));
        }
        if let (Some(grid), true) = (a_grid, self.a.is_finite()) {
            if !grid.iter().any(|&g| g == self.a) {
                return Err(domain(format!("degrees of freedom {} is off the grid", self.a)));
            }
        }
        for (name, m) in [("Σ_I", &self.sigma_i), ("Σ_B", &self.sigma_b)] {
            if m.clone().cholesky().is_none() || (m - m.transpose()).amax() > 1e-8 * m.amax().max(1.0) {
                return Err(domain(format!("{name} is not symmetric positive definite")));
            }
        }
        self.matern.validate()
    }
}

/// `μ_tp(s_i) = Σ_l beta[i,p,l] · B_l(t)`, laid out time-slowest, then site,
/// with the index fastest.
pub fn mean_surface(state: &ChainState, basis: &SplineBasis) -> Result<Vec<f64>> {
    let d = state.dims();
    if basis.n_basis() != d.splines || state.beta.len() != d.sites * d.indexes * d.splines {
        return Err(shape(format!(
            "basis has {} functions but the state carries {} spline coefficients",
            basis.n_basis(),
            d.splines
        )));
    }
    let sp = d.sites * d.indexes;
    let mut out = Vec::with_capacity(basis.n_times() * sp);
    for t in 0..basis.n_times() {
        let row = basis.row(t);
        for k in 0..sp {
            let coef = &state.beta[k * d.splines..(k + 1) * d.splines];
            out.push(coef.iter().zip(row).map(|(b, x)| b * x).sum());
        }
    }
    Ok(out)
}
