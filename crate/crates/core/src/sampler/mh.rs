//! Metropolis-Hastings updates of the Matérn parameters.
//!
//! Given the latent scales, `Σ_S` enters the joint density through the data
//! term `Σ_t N(Y_t; μ_t + |z_t|(1⊗λ), σ_t² Σ_S⊗Σ_I)` and the prior of `β`.
//! Both reduce to `-(K/2) log|Σ_S| - ‖L_S^{-1} F‖²/2` for a fixed `n × K`
//! matrix `F` of index- and spline-whitened residuals, so each candidate costs
//! one `n × n` factorization.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{apply_axis, corr_from_distances, MaternParams, SeparableGaussian, SpdFactor};
use crate::error::{Error, Result};
use crate::model::ChainState;
use crate::sampler::problem::Problem;

const NU_RANGE: (f64, f64) = (1e-8, 1e4);

/// Random-walk scales on the transformed parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    /// On `logit(ρ / ρ_max)`.
    pub rho: f64,
    /// On `log ν`.
    pub nu: f64,
    /// On `logit(γ)`.
    pub gamma: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes { rho: 0.3, nu: 0.3, gamma: 0.3 }
    }
}

/// The part of the joint log density that depends on `Σ_S`.
#[derive(Debug, Clone)]
pub struct SpatialTarget {
    whitened: DMatrix<f64>,
}

impl SpatialTarget {
    pub fn new(state: &ChainState, factors: &SeparableGaussian, problem: &Problem) -> Result<Self> {
        let d = problem.dims();
        let with_z = problem.variant.samples_skewness();
        let data_cols = d.times * d.indexes;
        let mut f = DMatrix::zeros(d.sites, data_cols + d.indexes * d.splines);
        for t in 0..d.times {
            let mut e = problem.residual(state, t, with_z);
            let s = 1.0 / state.sigma2[t].sqrt();
            for row in e.chunks_exact_mut(d.indexes) {
                factors.index.solve_lower(row);
            }
            for i in 0..d.sites {
                for p in 0..d.indexes {
                    f[(i, t * d.indexes + p)] = s * e[i * d.indexes + p];
                }
            }
        }
        let mut dev = problem.beta_deviation(state);
        let dims = [d.sites, d.indexes, d.splines];
        let sb = factors.spline.as_ref().ok_or_else(|| Error::Shape("spline factor Σ_B is missing".into()))?;
        apply_axis(&mut dev, &dims, 1, |x| factors.index.solve_lower(x));
        apply_axis(&mut dev, &dims, 2, |x| sb.solve_lower(x));
        let per_site = d.indexes * d.splines;
        for i in 0..d.sites {
            for k in 0..per_site {
                f[(i, data_cols + k)] = dev[i * per_site + k];
            }
        }
        Ok(SpatialTarget { whitened: f })
    }

    /// No information about `Σ_S`: the update samples from the prior.
    pub fn flat(sites: usize) -> Self {
        SpatialTarget { whitened: DMatrix::zeros(sites, 0) }
    }

    pub fn log_density(&self, spatial: &SpdFactor) -> f64 {
        let k = self.whitened.ncols();
        if k == 0 {
            return 0.0;
        }
        let w =
            spatial.lower().solve_lower_triangular(&self.whitened).expect("Cholesky factor has a positive diagonal");
        -0.5 * k as f64 * spatial.log_det() - 0.5 * w.norm_squared()
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_nu_prior(nu: f64, mean: f64, sd: f64) -> f64 {
    // density of log ν; the 1/ν of the log-normal cancels the log-scale Jacobian
    let z = (nu.ln() - mean) / sd;
    -0.5 * z * z
}

/// Outcome of one MH step.
#[derive(Debug, Clone)]
pub struct MhOutcome {
    pub accepted: bool,
    pub matern: MaternParams,
    /// Factor of the candidate `Σ_S` when accepted.
    pub spatial: Option<SpdFactor>,
}

fn candidate_factor(problem: &Problem, m: &MaternParams) -> Option<SpdFactor> {
    SpdFactor::new("spatial correlation Σ_S", corr_from_distances(problem.distances(), m)).ok()
}

fn accept<R: Rng + ?Sized>(rng: &mut R, log_ratio: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Joint random-walk update of `(ρ, ν)`.
pub fn mh_rho_nu_step<R: Rng + ?Sized>(
    current: &MaternParams,
    current_factor: &SpdFactor,
    target: &SpatialTarget,
    problem: &Problem,
    steps: &StepSizes,
    rng: &mut R,
) -> MhOutcome {
    let d_max = problem.priors.rho_max;
    let reject = MhOutcome { accepted: false, matern: *current, spatial: None };
    let e1: f64 = rng.sample(StandardNormal);
    let e2: f64 = rng.sample(StandardNormal);
    let rho = d_max * logistic(logit(current.rho / d_max) + steps.rho * e1);
    let nu = (current.nu.ln() + steps.nu * e2).exp();
    if !(rho > 0.0 && rho < d_max) || !(NU_RANGE.0..=NU_RANGE.1).contains(&nu) {
        return reject;
    }
    let cand = MaternParams { rho, nu, gamma: current.gamma };
    let Some(factor) = candidate_factor(problem, &cand) else { return reject };
    let (m, s) = (problem.priors.log_nu_mean, problem.priors.log_nu_sd);
    let log_ratio = target.log_density(&factor) - target.log_density(current_factor) + (rho * (d_max - rho)).ln()
        - (current.rho * (d_max - current.rho)).ln()
        + log_nu_prior(nu, m, s)
        - log_nu_prior(current.nu, m, s);
    if accept(rng, log_ratio) {
        MhOutcome { accepted: true, matern: cand, spatial: Some(factor) }
    } else {
        reject
    }
}

/// Random-walk update of `γ` on the logit scale.
pub fn mh_gamma_step<R: Rng + ?Sized>(
    current: &MaternParams,
    current_factor: &SpdFactor,
    target: &SpatialTarget,
    problem: &Problem,
    step: f64,
    rng: &mut R,
) -> MhOutcome {
    let reject = MhOutcome { accepted: false, matern: *current, spatial: None };
    let e: f64 = rng.sample(StandardNormal);
    let gamma = logistic(logit(current.gamma) + step * e);
    if !(gamma > 0.0 && gamma < 1.0) {
        return reject;
    }
    let cand = MaternParams { gamma, ..*current };
    let Some(factor) = candidate_factor(problem, &cand) else { return reject };
    let log_ratio = target.log_density(&factor) - target.log_density(current_factor) + (gamma * (1.0 - gamma)).ln()
        - (current.gamma * (1.0 - current.gamma)).ln();
    if accept(rng, log_ratio) {
        MhOutcome { accepted: true, matern: cand, spatial: Some(factor) }
    } else {
        reject
    }
}

fn apply(state: &mut ChainState, factors: &mut SeparableGaussian, out: MhOutcome) -> bool {
    if let Some(f) = out.spatial {
        factors.spatial = f;
        state.matern = out.matern;
    }
    out.accepted
}

pub fn mh_rho_nu<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &mut SeparableGaussian,
    problem: &Problem,
    steps: &StepSizes,
    rng: &mut R,
) -> Result<bool> {
    let target = SpatialTarget::new(state, factors, problem)?;
    let out = mh_rho_nu_step(&state.matern, &factors.spatial, &target, problem, steps, rng);
    Ok(apply(state, factors, out))
}

pub fn mh_gamma<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &mut SeparableGaussian,
    problem: &Problem,
    step: f64,
    rng: &mut R,
) -> Result<bool> {
    let target = SpatialTarget::new(state, factors, problem)?;
    let out = mh_gamma_step(&state.matern, &factors.spatial, &target, problem, step, rng);
    Ok(apply(state, factors, out))
}

/// Scales a step by 1.2 when the windowed acceptance rate is above the band
/// and by 0.8 when below it.
pub fn adapt_step(history: &[bool], step: f64, band: (f64, f64)) -> f64 {
    if history.is_empty() {
        return step;
    }
    let rate = history.iter().filter(|&&a| a).count() as f64 / history.len() as f64;
    if rate > band.1 {
        step * 1.2
    } else if rate < band.0 {
        step * 0.8
    } else {
        step
    }
}

/// Adapts all steps from their windowed acceptance histories.
pub fn adapt_steps(rho_nu: &[bool], gamma: &[bool], steps: StepSizes, band: (f64, f64)) -> StepSizes {
    let scale = adapt_step(rho_nu, 1.0, band);
    StepSizes { rho: steps.rho * scale, nu: steps.nu * scale, gamma: adapt_step(gamma, steps.gamma, band) }
}

/// Acceptance flags of the MH blocks, one per iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcceptanceLog {
    pub rho_nu: Vec<bool>,
    pub gamma: Vec<bool>,
}

impl AcceptanceLog {
    fn rate(v: &[bool]) -> f64 {
        if v.is_empty() {
            return f64::NAN;
        }
        v.iter().filter(|&&a| a).count() as f64 / v.len() as f64
    }

    /// Acceptance rates of `(ρ, ν)` and `γ` from iteration `from` on.
    pub fn rates_from(&self, from: usize) -> (f64, f64) {
        let cut = |v: &[bool]| Self::rate(&v[from.min(v.len())..]);
        (cut(&self.rho_nu), cut(&self.gamma))
    }
}
