//! Conjugate full-conditional updates.
//!
//! Each block works on factor-level algebra: the largest matrix ever
//! factorized is `max(n, P, L)` on a side.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{apply_axis, kron_quadform, SeparableGaussian, SpdFactor};
use crate::error::{Error, Result};
use crate::model::ChainState;
use crate::random::{categorical_from_log, inverse_gamma, inverse_wishart, truncated_normal_lower};
use crate::sampler::problem::Problem;
use crate::special::ln_gamma;

fn normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn spline_factor(factors: &SeparableGaussian) -> Result<&SpdFactor> {
    factors.spline.as_ref().ok_or_else(|| Error::Shape("spline factor Σ_B is missing".into()))
}

/// A Gaussian full conditional held as its mean and a factorized precision.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    pub mean: Vec<f64>,
    pub precision: SpdFactor,
}

impl GaussianConditional {
    fn from_linear(name: &str, precision: DMatrix<f64>, linear: Vec<f64>) -> Result<Self> {
        let precision = SpdFactor::new(name, precision)?;
        let mut mean = linear;
        precision.solve(&mut mean);
        Ok(GaussianConditional { mean, precision })
    }

    /// `mean + L^{-T} ξ` for the precision factor `L L'`.
    pub fn draw_with(&self, xi: &[f64]) -> Vec<f64> {
        let mut v = xi.to_vec();
        self.precision.solve_upper(&mut v);
        v.iter().zip(&self.mean).map(|(a, b)| a + b).collect()
    }
}

/// Conditional of `β`: mean (site, index, spline ordering) and the `L × L`
/// matrix `M = Σ_t x_t x_t' / σ_t² + Σ_B^{-1}`, so that the covariance is
/// `Σ_S ⊗ Σ_I ⊗ M^{-1}`.
pub fn beta_conditional(
    state: &ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
) -> Result<GaussianConditional> {
    let d = problem.dims();
    let basis = &problem.basis;
    let sb = spline_factor(factors)?;
    let mut m = sb.inverse();
    for t in 0..d.times {
        let x = basis.row(t);
        let w = 1.0 / state.sigma2[t];
        for a in 0..d.splines {
            for b in 0..d.splines {
                m[(a, b)] += w * x[a] * x[b];
            }
        }
    }
    let prior_pull = sb.solve_ones();
    let sp = d.sites * d.indexes;
    let mut lin = vec![0.0; sp * d.splines];
    for k in 0..sp {
        let mu = state.mu_beta[k % d.indexes];
        for (l, w) in prior_pull.iter().enumerate() {
            lin[k * d.splines + l] = mu * w;
        }
    }
    for t in 0..d.times {
        let x = basis.row(t);
        let w = 1.0 / state.sigma2[t];
        let y = problem.data.at_time(t);
        for k in 0..sp {
            let r = (y[k] - state.z_abs[t] * state.lambda[k % d.indexes]) * w;
            for (l, xl) in x.iter().enumerate() {
                lin[k * d.splines + l] += r * xl;
            }
        }
    }
    let precision = SpdFactor::new("spline precision of β", m)?;
    for chunk in lin.chunks_exact_mut(d.splines) {
        precision.solve(chunk);
    }
    Ok(GaussianConditional { mean: lin, precision })
}

/// `β` draw from its conditional given standard normal variates `xi`:
/// `mean + (L_S ⊗ L_I ⊗ L_M^{-T}) ξ`.
pub fn beta_draw_with(cond: &GaussianConditional, factors: &SeparableGaussian, xi: &[f64]) -> Vec<f64> {
    let dims = [factors.spatial.dim(), factors.index.dim(), cond.precision.dim()];
    let mut v = xi.to_vec();
    apply_axis(&mut v, &dims, 2, |x| cond.precision.solve_upper(x));
    apply_axis(&mut v, &dims, 1, |x| factors.index.mul_lower(x));
    apply_axis(&mut v, &dims, 0, |x| factors.spatial.mul_lower(x));
    v.iter().zip(&cond.mean).map(|(a, b)| a + b).collect()
}

pub fn gibbs_beta<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
    rng: &mut R,
) -> Result<()> {
    let cond = beta_conditional(state, factors, problem)?;
    let xi = normals(rng, cond.mean.len());
    state.beta = beta_draw_with(&cond, factors, &xi);
    Ok(())
}

/// Conditional of `μ_β`.
pub fn mu_beta_conditional(
    state: &ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
) -> Result<GaussianConditional> {
    let d = problem.dims();
    let ws = factors.spatial.solve_ones();
    let wb = spline_factor(factors)?.solve_ones();
    let scale = ws.iter().sum::<f64>() * wb.iter().sum::<f64>();
    let mut v = vec![0.0; d.indexes];
    for i in 0..d.sites {
        for p in 0..d.indexes {
            for l in 0..d.splines {
                v[p] += ws[i] * wb[l] * state.beta[d.beta_at(i, p, l)];
            }
        }
    }
    factors.index.solve(&mut v);
    let prior_prec = problem.priors.mu_beta_sd.powi(-2);
    let prec = factors.index.inverse() * scale + DMatrix::identity(d.indexes, d.indexes) * prior_prec;
    GaussianConditional::from_linear("precision of μ_β", prec, v)
}

pub fn gibbs_mu_beta<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
    rng: &mut R,
) -> Result<()> {
    let cond = mu_beta_conditional(state, factors, problem)?;
    state.mu_beta = cond.draw_with(&normals(rng, cond.mean.len()));
    Ok(())
}

/// Conditional of `λ`.
pub fn lambda_conditional(
    state: &ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
) -> Result<GaussianConditional> {
    let d = problem.dims();
    let ws = factors.spatial.solve_ones();
    let ones_quad: f64 = ws.iter().sum();
    let mut z2 = 0.0;
    let mut v = vec![0.0; d.indexes];
    for t in 0..d.times {
        let w = 1.0 / state.sigma2[t];
        z2 += state.z_abs[t] * state.z_abs[t] * w;
        let e = problem.residual(state, t, false);
        for i in 0..d.sites {
            for p in 0..d.indexes {
                v[p] += state.z_abs[t] * w * ws[i] * e[i * d.indexes + p];
            }
        }
    }
    factors.index.solve(&mut v);
    let prior_prec = problem.priors.lambda_sd.powi(-2);
    let prec = factors.index.inverse() * (ones_quad * z2) + DMatrix::identity(d.indexes, d.indexes) * prior_prec;
    GaussianConditional::from_linear("precision of λ", prec, v)
}

pub fn gibbs_lambda<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
    rng: &mut R,
) -> Result<()> {
    let cond = lambda_conditional(state, factors, problem)?;
    state.lambda = cond.draw_with(&normals(rng, cond.mean.len()));
    Ok(())
}

/// Location and scale of the positive-truncated normal conditional of `|z_t|`.
pub fn z_conditional(state: &ChainState, factors: &SeparableGaussian, problem: &Problem, t: usize) -> (f64, f64) {
    let d = problem.dims();
    let ws = factors.spatial.solve_ones();
    let mut sl = state.lambda.clone();
    factors.index.solve(&mut sl);
    let kappa = ws.iter().sum::<f64>() * sl.iter().zip(&state.lambda).map(|(a, b)| a * b).sum::<f64>();
    let e = problem.residual(state, t, false);
    let mut w = 0.0;
    for i in 0..d.sites {
        for p in 0..d.indexes {
            w += ws[i] * sl[p] * e[i * d.indexes + p];
        }
    }
    (w / (1.0 + kappa), (state.sigma2[t] / (1.0 + kappa)).sqrt())
}

pub fn gibbs_z<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
    rng: &mut R,
) -> Result<()> {
    for t in 0..problem.dims().times {
        let (mu, sd) = z_conditional(state, factors, problem, t);
        state.z_abs[t] = truncated_normal_lower(rng, mu, sd, 0.0)?;
    }
    Ok(())
}

/// Shape and rate of the inverse-gamma conditional of `σ_t²`. Without the
/// skewness term (`with_z = false`) the latent `|z_t|` carries no information.
pub fn sigma2_conditional(
    state: &ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
    t: usize,
    with_z: bool,
) -> Result<(f64, f64)> {
    let d = problem.dims();
    let e = problem.residual(state, t, with_z);
    let q = kron_quadform(factors, &e, false)?;
    let np = (d.sites * d.indexes) as f64;
    Ok(if with_z {
        let z = state.z_abs[t];
        (0.5 * (state.a + np + 1.0), 0.5 * (state.a + q + z * z))
    } else {
        (0.5 * (state.a + np), 0.5 * (state.a + q))
    })
}

pub fn gibbs_sigma2<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
    rng: &mut R,
) -> Result<()> {
    let with_z = problem.variant.samples_skewness();
    for t in 0..problem.dims().times {
        let (shape, rate) = sigma2_conditional(state, factors, problem, t, with_z)?;
        state.sigma2[t] = inverse_gamma(rng, shape, rate)?;
    }
    Ok(())
}

/// Log posterior masses of `a` over `grid` given the mixing variances.
pub fn a_log_masses(sigma2: &[f64], grid: &[f64]) -> Vec<f64> {
    let t = sigma2.len() as f64;
    let sum_ln: f64 = sigma2.iter().map(|s| s.ln()).sum();
    let sum_inv: f64 = sigma2.iter().map(|s| 1.0 / s).sum();
    grid.iter()
        .map(|&a| {
            let h = 0.5 * a;
            t * (h * h.ln() - ln_gamma(h)) - (h + 1.0) * sum_ln - h * sum_inv
        })
        .collect()
}

/// Draw of `a` from its discrete conditional.
pub fn sample_a<R: Rng + ?Sized>(rng: &mut R, sigma2: &[f64], grid: &[f64]) -> Result<f64> {
    Ok(grid[categorical_from_log(rng, &a_log_masses(sigma2, grid))?])
}

pub fn gibbs_a<R: Rng + ?Sized>(state: &mut ChainState, problem: &Problem, rng: &mut R) -> Result<()> {
    state.a = sample_a(rng, &state.sigma2, &problem.priors.a_grid)?;
    Ok(())
}

/// Degrees of freedom and scale of the inverse-Wishart conditional of `Σ_I`.
pub fn sigma_i_conditional(
    state: &ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
) -> Result<(f64, DMatrix<f64>)> {
    let d = problem.dims();
    let pr = &problem.priors;
    let mut s = DMatrix::identity(d.indexes, d.indexes) * pr.iw_scale;
    let with_z = problem.variant.samples_skewness();
    for t in 0..d.times {
        let e = problem.residual(state, t, with_z);
        let mut eh = e.clone();
        apply_axis(&mut eh, &[d.sites, d.indexes], 0, |x| factors.spatial.solve(x));
        let w = 1.0 / state.sigma2[t];
        for i in 0..d.sites {
            for p in 0..d.indexes {
                for q in 0..d.indexes {
                    s[(p, q)] += w * e[i * d.indexes + p] * eh[i * d.indexes + q];
                }
            }
        }
    }
    let dev = problem.beta_deviation(state);
    let mut dh = dev.clone();
    let dims = [d.sites, d.indexes, d.splines];
    let sb = spline_factor(factors)?;
    apply_axis(&mut dh, &dims, 0, |x| factors.spatial.solve(x));
    apply_axis(&mut dh, &dims, 2, |x| sb.solve(x));
    for i in 0..d.sites {
        for p in 0..d.indexes {
            for q in 0..d.indexes {
                for l in 0..d.splines {
                    s[(p, q)] += dev[d.beta_at(i, p, l)] * dh[d.beta_at(i, q, l)];
                }
            }
        }
    }
    let df = pr.iw_df + (d.sites * d.times + d.sites * d.splines) as f64;
    Ok((df, (&s + s.transpose()) * 0.5))
}

pub fn gibbs_sigma_i<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &mut SeparableGaussian,
    problem: &Problem,
    rng: &mut R,
) -> Result<()> {
    let (df, scale) = sigma_i_conditional(state, factors, problem)?;
    let scale = SpdFactor::new("inverse-Wishart scale of Σ_I", scale)?;
    let draw = inverse_wishart(rng, df, &scale)?;
    factors.index = SpdFactor::new("index covariance Σ_I", draw.clone())?;
    state.sigma_i = draw;
    Ok(())
}

/// Degrees of freedom and scale of the inverse-Wishart conditional of `Σ_B`.
pub fn sigma_b_conditional(
    state: &ChainState,
    factors: &SeparableGaussian,
    problem: &Problem,
) -> Result<(f64, DMatrix<f64>)> {
    let d = problem.dims();
    let pr = &problem.priors;
    let mut s = DMatrix::identity(d.splines, d.splines) * pr.iw_scale;
    let dev = problem.beta_deviation(state);
    let mut dh = dev.clone();
    let dims = [d.sites, d.indexes, d.splines];
    apply_axis(&mut dh, &dims, 0, |x| factors.spatial.solve(x));
    apply_axis(&mut dh, &dims, 1, |x| factors.index.solve(x));
    for (a, b) in dev.chunks_exact(d.splines).zip(dh.chunks_exact(d.splines)) {
        for l in 0..d.splines {
            for m in 0..d.splines {
                s[(l, m)] += a[l] * b[m];
            }
        }
    }
    let df = pr.iw_df + (d.sites * d.indexes) as f64;
    Ok((df, (&s + s.transpose()) * 0.5))
}

pub fn gibbs_sigma_b<R: Rng + ?Sized>(
    state: &mut ChainState,
    factors: &mut SeparableGaussian,
    problem: &Problem,
    rng: &mut R,
) -> Result<()> {
    let (df, scale) = sigma_b_conditional(state, factors, problem)?;
    let scale = SpdFactor::new("inverse-Wishart scale of Σ_B", scale)?;
    let draw = inverse_wishart(rng, df, &scale)?;
    factors.spline = Some(SpdFactor::new("spline covariance Σ_B", draw.clone())?);
    state.sigma_b = draw;
    Ok(())
}
