use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::covariance::{corr_from_distances, distance_matrix, SeparableGaussian, SpdFactor};
use crate::error::{shape, Result};
use crate::model::{ChainState, Dims, JointSkewT, ObservationTensor, SiteSkewT, SplineBasis};
use crate::sampler::config::{PriorConfig, Variant};

/// Everything a sweep conditions on besides the chain state.
#[derive(Debug, Clone)]
pub struct Problem {
    pub data: ObservationTensor,
    pub basis: SplineBasis,
    pub priors: PriorConfig,
    pub variant: Variant,
    distances: DMatrix<f64>,
}

impl Problem {
    pub fn new(data: ObservationTensor, basis: SplineBasis, priors: PriorConfig, variant: Variant) -> Result<Self> {
        priors.validate()?;
        if basis.n_times() != data.n_times() {
            return Err(shape(format!(
                "basis has {} rows but the data has {} time points",
                basis.n_times(),
                data.n_times()
            )));
        }
        let distances = distance_matrix(data.sites());
        Ok(Problem { data, basis, priors, variant, distances })
    }

    pub fn dims(&self) -> Dims {
        Dims {
            sites: self.data.n_sites(),
            indexes: self.data.n_indexes(),
            splines: self.basis.n_basis(),
            times: self.data.n_times(),
        }
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }

    /// Factorized `Σ_S`, `Σ_I`, `Σ_B` of a state.
    pub fn factors(&self, state: &ChainState) -> Result<SeparableGaussian> {
        state.matern.validate()?;
        Ok(SeparableGaussian::from_factors(
            SpdFactor::new("spatial correlation Σ_S", corr_from_distances(&self.distances, &state.matern))?,
            SpdFactor::new("index covariance Σ_I", state.sigma_i.clone())?,
            Some(SpdFactor::new("spline covariance Σ_B", state.sigma_b.clone())?),
        ))
    }

    pub(crate) fn check_state(&self, state: &ChainState) -> Result<()> {
        let d = self.dims();
        if state.dims() != d || state.beta.len() != d.sites * d.indexes * d.splines {
            return Err(shape(format!("state dimensions {:?} do not match the problem {:?}", state.dims(), d)));
        }
        Ok(())
    }

    /// `μ_t` for one time point.
    pub fn mean_at(&self, state: &ChainState, t: usize) -> Vec<f64> {
        let l = self.basis.n_basis();
        let row = self.basis.row(t);
        state.beta.chunks_exact(l).map(|c| c.iter().zip(row).map(|(b, x)| b * x).sum()).collect()
    }

    /// `Y_t - μ_t`, optionally also net of `|z_t| (1 ⊗ λ)`.
    pub fn residual(&self, state: &ChainState, t: usize, net_of_skew: bool) -> Vec<f64> {
        let p = self.data.n_indexes();
        let mu = self.mean_at(state, t);
        let shift = if net_of_skew { state.z_abs[t] } else { 0.0 };
        self.data
            .at_time(t)
            .iter()
            .zip(&mu)
            .enumerate()
            .map(|(k, (y, m))| y - m - shift * state.lambda[k % p])
            .collect()
    }

    /// `β - 1 ⊗ μ_β ⊗ 1`.
    pub fn beta_deviation(&self, state: &ChainState) -> Vec<f64> {
        let d = self.dims();
        state.beta.iter().enumerate().map(|(k, b)| b - state.mu_beta[(k / d.splines) % d.indexes]).collect()
    }

    /// Marginal log-likelihood pieces of a state: the full-data deviance and
    /// the site-time pointwise log-densities (time-slowest).
    pub fn log_likelihood(&self, state: &ChainState, factors: &SeparableGaussian) -> Result<(f64, Vec<f64>)> {
        let d = self.dims();
        let joint = JointSkewT::new(factors, &state.lambda, state.a)?;
        let site = SiteSkewT::from_factor(factors.index.clone(), &state.lambda, state.a)?;
        let mut total = 0.0;
        let mut pointwise = vec![0.0; d.times * d.sites];
        for t in 0..d.times {
            let e = self.residual(state, t, false);
            total += joint.log_density(factors, &e)?;
            for i in 0..d.sites {
                pointwise[t * d.sites + i] = site.log_density(&e[i * d.indexes..(i + 1) * d.indexes]);
            }
        }
        Ok((-2.0 * total, pointwise))
    }

    /// Full-data deviance of a state.
    pub fn deviance(&self, state: &ChainState) -> Result<f64> {
        let f = self.factors(state)?;
        Ok(self.log_likelihood(state, &f)?.0)
    }
}
