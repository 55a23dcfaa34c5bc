//! Forward simulation of the hierarchy.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{
    build_spatial_corr, kron_mvn_sample, max_distance, Coord, MaternParams, SeparableGaussian, SpdFactor,
};
use crate::error::{domain, shape, Result};
use crate::model::{ChainState, Dims, ObservationTensor, SplineBasis};
use crate::random::{inverse_gamma, inverse_wishart};
use crate::sampler::{PriorConfig, Variant};

/// One simulated dataset together with the latent scales that produced it.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: ObservationTensor,
    pub z_abs: Vec<f64>,
    pub sigma2: Vec<f64>,
}

fn factors_of(truth: &ChainState, sites: &[Coord], with_b: bool) -> Result<SeparableGaussian> {
    SeparableGaussian::new(
        build_spatial_corr(sites, &truth.matern)?,
        truth.sigma_i.clone(),
        with_b.then(|| truth.sigma_b.clone()),
    )
}

/// `Y_t = μ_t + |z_t|(1⊗λ) + σ_t ε_t` with the given latent scales, laid out
/// time-slowest.
pub fn simulate_given_latents<R: Rng + ?Sized>(
    truth: &ChainState,
    factors: &SeparableGaussian,
    basis: &SplineBasis,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = truth.dims();
    if basis.n_basis() != d.splines || factors.spatial.dim() != d.sites || basis.n_times() != d.times {
        return Err(shape("truth, basis and factors disagree in size"));
    }
    let np = d.sites * d.indexes;
    let mut y = Vec::with_capacity(d.times * np);
    let zeros = vec![0.0; np];
    for t in 0..d.times {
        let eps = kron_mvn_sample(rng, &zeros, factors, truth.sigma2[t])?;
        let x = basis.row(t);
        for k in 0..np {
            let mu: f64 = truth.beta[k * d.splines..(k + 1) * d.splines].iter().zip(x).map(|(b, v)| b * v).sum();
            y.push(mu + truth.z_abs[t] * truth.lambda[k % d.indexes] + eps[k]);
        }
    }
    Ok(y)
}

/// Draws fresh `σ_t² ~ IG(a/2, a/2)` (or 1 when `a = ∞`) and `|z_t|` with
/// `z_t ~ N(0, σ_t²)`, then the observations.
pub fn simulate_dataset_with_latents<R: Rng + ?Sized>(
    truth: &ChainState,
    sites: &[Coord],
    times: &[f64],
    basis: &SplineBasis,
    rng: &mut R,
) -> Result<Simulated> {
    let d = truth.dims();
    if sites.len() != d.sites || times.len() != basis.n_times() {
        return Err(shape("sites or times do not match the truth and basis"));
    }
    let mut latent = truth.clone();
    latent.sigma2 = vec![1.0; times.len()];
    latent.z_abs = vec![0.0; times.len()];
    for t in 0..times.len() {
        let s2 = if truth.a.is_infinite() { 1.0 } else { inverse_gamma(rng, 0.5 * truth.a, 0.5 * truth.a)? };
        let z: f64 = rng.sample(StandardNormal);
        latent.sigma2[t] = s2;
        latent.z_abs[t] = z.abs() * s2.sqrt();
    }
    let factors = factors_of(truth, sites, false)?;
    let y = simulate_given_latents(&latent, &factors, basis, rng)?;
    let data = ObservationTensor::new(
        y,
        (0..d.sites).map(|i| format!("s{:03}", i + 1)).collect(),
        sites.to_vec(),
        times.to_vec(),
        (0..d.indexes).map(|p| format!("index{}", p + 1)).collect::<Vec<String>>(),
    )?;
    Ok(Simulated { data, z_abs: latent.z_abs, sigma2: latent.sigma2 })
}

/// A dataset drawn from the hierarchy at `truth`.
pub fn simulate_dataset<R: Rng + ?Sized>(
    truth: &ChainState,
    sites: &[Coord],
    times: &[f64],
    basis: &SplineBasis,
    rng: &mut R,
) -> Result<ObservationTensor> {
    Ok(simulate_dataset_with_latents(truth, sites, times, basis, rng)?.data)
}

/// Spline coefficients from `N(1⊗μ_β⊗1, Σ_S⊗Σ_I⊗Σ_B)`.
pub fn simulate_beta<R: Rng + ?Sized>(factors: &SeparableGaussian, mu_beta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let l = factors.spline.as_ref().ok_or_else(|| shape("Σ_B factor required"))?.dim();
    if mu_beta.len() != factors.index.dim() {
        return Err(shape("μ_β does not match Σ_I"));
    }
    let n = factors.spatial.dim();
    let mean: Vec<f64> = (0..n * mu_beta.len() * l).map(|k| mu_beta[(k / l) % mu_beta.len()]).collect();
    kron_mvn_sample(rng, &mean, factors, 1.0)
}

/// A full state drawn from the prior. Every prior involved must be proper:
/// the inverse-Wishart degrees of freedom must exceed `max(P, L) - 1`.
pub fn sample_prior<R: Rng + ?Sized>(
    priors: &PriorConfig,
    dims: Dims,
    sites: &[Coord],
    variant: Variant,
    rng: &mut R,
) -> Result<ChainState> {
    priors.validate()?;
    if sites.len() != dims.sites {
        return Err(shape("one coordinate per site is required"));
    }
    if sites.len() > 1 && max_distance(sites) > priors.rho_max * (1.0 + 1e-12) {
        return Err(domain("rho_max is smaller than the site diameter"));
    }
    let iw = |rng: &mut R, dim: usize| -> Result<DMatrix<f64>> {
        let scale = SpdFactor::new("prior inverse-Wishart scale", DMatrix::identity(dim, dim) * priors.iw_scale)?;
        inverse_wishart(rng, priors.iw_df, &scale)
    };
    let sigma_i = iw(rng, dims.indexes)?;
    let sigma_b = iw(rng, dims.splines)?;
    let rho = priors.rho_max * rng.random::<f64>().max(f64::MIN_POSITIVE);
    let nu = (priors.log_nu_mean + priors.log_nu_sd * rng.sample::<f64, _>(StandardNormal)).exp();
    let gamma = rng.random::<f64>();
    let matern = MaternParams::new(rho, nu, gamma)?;
    let mu_beta: Vec<f64> =
        (0..dims.indexes).map(|_| priors.mu_beta_sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let lambda: Vec<f64> = (0..dims.indexes)
        .map(|_| if variant.samples_skewness() { priors.lambda_sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
        .collect();
    let (a, sigma2, z_abs) = if variant.samples_scale_mixture() {
        let a = priors.a_grid[rng.random_range(0..priors.a_grid.len())];
        let mut s2 = Vec::with_capacity(dims.times);
        let mut z = Vec::with_capacity(dims.times);
        for _ in 0..dims.times {
            let s = inverse_gamma(rng, 0.5 * a, 0.5 * a)?;
            let e: f64 = rng.sample(StandardNormal);
            s2.push(s);
            z.push(if variant.samples_skewness() { e.abs() * s.sqrt() } else { 0.0 });
        }
        (a, s2, z)
    } else {
        (f64::INFINITY, vec![1.0; dims.times], vec![0.0; dims.times])
    };
    let factors = SeparableGaussian::new(build_spatial_corr(sites, &matern)?, sigma_i.clone(), Some(sigma_b.clone()))?;
    let beta = simulate_beta(&factors, &mu_beta, rng)?;
    Ok(ChainState { beta, mu_beta, lambda, z_abs, sigma2, a, sigma_i, sigma_b, matern })
}
