//! Skew-t densities arising from the scale-mixture representation
//! `Y = μ + |z| λ + σ ε` with `σ² ~ IG(a/2, a/2)`, `z | σ ~ N(0, σ²)`.
//!
//! Every density here is evaluated in log space; the Student-t pieces use the
//! regularized incomplete beta function so fractional degrees of freedom are
//! exact. `dof = ∞` gives the skew-normal limit.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::covariance::{SeparableGaussian, SpdFactor};
use crate::error::{domain, shape, Result};
use crate::special::{ln_gamma, normal_ln_cdf, t_ln_cdf, t_ln_pdf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTParams {
    pub location: f64,
    /// Gaussian scale of the symmetric part.
    pub scale_sq: f64,
    /// Skewness loading of `|z|`.
    pub skew: f64,
    pub dof: f64,
}

impl SkewTParams {
    pub fn new(location: f64, scale_sq: f64, skew: f64, dof: f64) -> Result<Self> {
        let p = SkewTParams { location, scale_sq, skew, dof };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_sq > 0.0 && self.scale_sq.is_finite()) {
            return Err(domain(format!("scale must be positive, got {}", self.scale_sq)));
        }
        if !(self.dof > 0.0) {
            return Err(domain(format!("degrees of freedom must be positive, got {}", self.dof)));
        }
        if !(self.location.is_finite() && self.skew.is_finite()) {
            return Err(domain("location and skewness must be finite"));
        }
        Ok(())
    }

    /// Standardized skewness `skew / sqrt(scale_sq)`.
    pub fn lambda_star(&self) -> f64 {
        self.skew / self.scale_sq.sqrt()
    }
}

/// Log-density of the univariate skew-t.
pub fn skewt_logpdf_uni(y: f64, params: &SkewTParams) -> Result<f64> {
    params.validate()?;
    let a = params.dof;
    let omega = (params.scale_sq + params.skew * params.skew).sqrt();
    let u = (y - params.location) / omega;
    let slant = params.lambda_star() * u;
    let tail = if a.is_infinite() {
        normal_ln_cdf(slant)
    } else {
        t_ln_cdf(slant * ((a + 1.0) / (a + u * u)).sqrt(), a + 1.0)
    };
    Ok(LN_2 - omega.ln() + t_ln_pdf(u, a) + tail)
}

/// Log-density of a `d`-variate skew-t given the shape quadratic form `q`,
/// `log|Ω|` and the slant term `η'e` before the degrees-of-freedom rescaling.
fn skewt_kernel(d: usize, log_det_omega: f64, q: f64, slant: f64, a: f64) -> f64 {
    let d = d as f64;
    if a.is_infinite() {
        return LN_2 - 0.5 * d * (2.0 * PI).ln() - 0.5 * log_det_omega - 0.5 * q + normal_ln_cdf(slant);
    }
    let body = ln_gamma(0.5 * (a + d))
        - ln_gamma(0.5 * a)
        - 0.5 * d * (a * PI).ln()
        - 0.5 * log_det_omega
        - 0.5 * (a + d) * (q / a).ln_1p();
    LN_2 + body + t_ln_cdf(slant * ((a + d) / (a + q)).sqrt(), a + d)
}

/// Precomputed site-level `P`-variate skew-t with shape `Σ_I + λλ'`.
#[derive(Debug, Clone)]
pub struct SiteSkewT {
    factor: SpdFactor,
    solved_lambda: Vec<f64>,
    kappa: f64,
    log_det_omega: f64,
    dof: f64,
}

impl SiteSkewT {
    pub fn new(sigma_i: &DMatrix<f64>, lambda: &[f64], dof: f64) -> Result<Self> {
        Self::from_factor(SpdFactor::new("index covariance Σ_I", sigma_i.clone())?, lambda, dof)
    }

    pub fn from_factor(factor: SpdFactor, lambda: &[f64], dof: f64) -> Result<Self> {
        if lambda.len() != factor.dim() {
            return Err(shape("skewness vector does not match Σ_I"));
        }
        if !(dof > 0.0) {
            return Err(domain(format!("degrees of freedom must be positive, got {dof}")));
        }
        let mut solved_lambda = lambda.to_vec();
        factor.solve(&mut solved_lambda);
        let kappa: f64 = solved_lambda.iter().zip(lambda).map(|(a, b)| a * b).sum();
        let log_det_omega = factor.log_det() + kappa.ln_1p();
        Ok(SiteSkewT { factor, solved_lambda, kappa, log_det_omega, dof })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    /// Log-density at residual `e = y - mean`.
    pub fn log_density(&self, e: &[f64]) -> f64 {
        let w: f64 = self.solved_lambda.iter().zip(e).map(|(a, b)| a * b).sum();
        let q = self.factor.quad_form(e) - w * w / (1.0 + self.kappa);
        skewt_kernel(self.dim(), self.log_det_omega, q.max(0.0), w / (1.0 + self.kappa).sqrt(), self.dof)
    }
}

/// Log-density of the `P`-variate skew-t with shape `Σ_I + λλ'`.
pub fn skewt_logpdf_multi(y: &[f64], mean: &[f64], sigma_i: &DMatrix<f64>, lambda: &[f64], a: f64) -> Result<f64> {
    if y.len() != mean.len() || y.len() != sigma_i.nrows() {
        return Err(shape("observation, mean and Σ_I dimensions disagree"));
    }
    let law = SiteSkewT::new(sigma_i, lambda, a)?;
    let e: Vec<f64> = y.iter().zip(mean).map(|(a, b)| a - b).collect();
    Ok(law.log_density(&e))
}

/// Joint `nP`-variate skew-t of one time slice `Y_t`, with shape
/// `Σ_S ⊗ Σ_I + (1⊗λ)(1⊗λ)'`, evaluated through the Kronecker factors.
#[derive(Debug, Clone)]
pub struct JointSkewT {
    spatial_ones: Vec<f64>,
    solved_lambda: Vec<f64>,
    kappa: f64,
    log_det_omega: f64,
    dof: f64,
}

impl JointSkewT {
    pub fn new(g: &SeparableGaussian, lambda: &[f64], dof: f64) -> Result<Self> {
        if lambda.len() != g.index.dim() {
            return Err(shape("skewness vector does not match Σ_I"));
        }
        let spatial_ones = g.spatial.solve_ones();
        let mut solved_lambda = lambda.to_vec();
        g.index.solve(&mut solved_lambda);
        let ones_quad: f64 = spatial_ones.iter().sum();
        let lambda_quad: f64 = solved_lambda.iter().zip(lambda).map(|(a, b)| a * b).sum();
        let kappa = ones_quad * lambda_quad;
        let log_det_omega = crate::covariance::kron_logdet(g, 1.0, false)? + kappa.ln_1p();
        Ok(JointSkewT { spatial_ones, solved_lambda, kappa, log_det_omega, dof })
    }

    /// Log-density of the slice residual `e = Y_t - μ_t` given `q = e'(Σ_S⊗Σ_I)^{-1}e`.
    pub fn log_density_with_quad(&self, e: &[f64], q: f64) -> f64 {
        let p = self.solved_lambda.len();
        let mut w = 0.0;
        for (i, ws) in self.spatial_ones.iter().enumerate() {
            let row = &e[i * p..(i + 1) * p];
            w += ws * row.iter().zip(&self.solved_lambda).map(|(a, b)| a * b).sum::<f64>();
        }
        let q = q - w * w / (1.0 + self.kappa);
        skewt_kernel(e.len(), self.log_det_omega, q.max(0.0), w / (1.0 + self.kappa).sqrt(), self.dof)
    }

    pub fn log_density(&self, g: &SeparableGaussian, e: &[f64]) -> Result<f64> {
        let q = crate::covariance::kron_quadform(g, e, false)?;
        Ok(self.log_density_with_quad(e, q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma, StandardNormal};

    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for k in 1..n {
            s += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn symmetric_case_is_scaled_t() {
        for &(s2, a) in &[(1.0, 3.0), (2.5, 0.7), (0.3, 15.2)] {
            let p = SkewTParams::new(0.4, s2, 0.0, a).unwrap();
            for &y in &[-5.0, -0.3, 0.0, 1.7, 40.0] {
                let sd: f64 = Float::sqrt(s2);
                let reference = t_ln_pdf((y - 0.4) / sd, a) - sd.ln();
                assert!((skewt_logpdf_uni(y, &p).unwrap() - reference).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn integrates_to_one() {
        for &(s2, lam, a) in &[(1.0, 2.0, 4.0), (0.5, -3.0, 12.0), (2.0, 0.7, 2.5), (1.0, 5.0, f64::INFINITY)] {
            let p = SkewTParams::new(0.0, s2, lam, a).unwrap();
            // y = 3 tan θ maps the whole line onto (-π/2, π/2).
            let f = |th: f64| {
                let c = th.cos();
                if c <= 0.0 {
                    return 0.0;
                }
                (skewt_logpdf_uni(3.0 * th.tan(), &p).unwrap()).exp() * 3.0 / (c * c)
            };
            let total = simpson(f, -PI / 2.0, PI / 2.0, 400_000);
            assert!((total - 1.0).abs() < 1e-6, "{s2} {lam} {a}: {total}");
        }
    }

    #[test]
    fn reflection_symmetry() {
        let p = SkewTParams::new(0.0, 1.3, 1.1, 5.5).unwrap();
        let q = SkewTParams { skew: -1.1, ..p };
        for &y in &[-3.0, -0.5, 0.2, 4.0] {
            assert!((skewt_logpdf_uni(y, &p).unwrap() - skewt_logpdf_uni(-y, &q).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_simulation_deciles() {
        // Draws via the variance mixture; compare CDF at empirical deciles.
        let (s2, lam, a) = (1.0, 1.8, 4.0);
        let p = SkewTParams::new(0.0, s2, lam, a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gam = Gamma::new(a / 2.0, 2.0 / a).unwrap();
        let mut draws: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let sigma2 = 1.0 / gam.sample(&mut rng);
                let sd: f64 = Float::sqrt(sigma2);
                let z: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
                let e: f64 = rng.sample(StandardNormal);
                z.abs() * lam + sd * Float::sqrt(s2) * e
            })
            .collect();
        draws.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let n = draws.len();
        for k in 1..10 {
            let q = draws[k * n / 10];
            let cdf = simpson(|y| skewt_logpdf_uni(y, &p).unwrap().exp(), -300.0, q, 200_000);
            // binomial MC error at a decile is sqrt(0.09 / 1e6) = 3e-4
            assert!((cdf - k as f64 / 10.0).abs() < 1.5e-3, "decile {k}: {cdf}");
        }
    }

    #[test]
    fn multi_reduces_to_uni() {
        let s = DMatrix::from_element(1, 1, 1.7);
        for &(lam, a) in &[(0.0, 3.0), (2.2, 6.1), (-1.0, 0.4), (1.5, f64::INFINITY)] {
            let p = SkewTParams::new(0.3, 1.7, lam, a).unwrap();
            for &y in &[-2.0, 0.3, 5.0] {
                let m = skewt_logpdf_multi(&[y], &[0.3], &s, &[lam], a).unwrap();
                assert!((m - skewt_logpdf_uni(y, &p).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn multi_symmetric_is_multivariate_t() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let inv = s.clone().try_inverse().unwrap();
        let a = 5.0;
        let y = [0.7, -1.2];
        let q = (nalgebra::RowVector2::new(y[0], y[1]) * inv * nalgebra::Vector2::new(y[0], y[1]))[(0, 0)];
        let reference =
            ln_gamma(3.5) - ln_gamma(2.5) - (a * PI).ln() - 0.5 * s.determinant().ln() - 3.5 * (q / a).ln_1p();
        let got = skewt_logpdf_multi(&y, &[0.0, 0.0], &s, &[0.0, 0.0], a).unwrap();
        assert!((got - reference).abs() < 1e-12);
    }

    #[test]
    fn bivariate_integrates_and_marginalizes() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.5]);
        let lam = [1.2, -0.8];
        let a = 6.0;
        let (lo, hi, n) = (-40.0, 40.0, 1600);
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let y = [lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h];
                total += skewt_logpdf_multi(&y, &[0.0, 0.0], &s, &lam, a).unwrap().exp();
            }
        }
        assert!((total * h * h - 1.0).abs() < 1e-4);

        // Diagonal Σ_I, skewness only in the first coordinate.
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.8]));
        let lam = [1.5, 0.0];
        let p1 = SkewTParams::new(0.0, 1.0, 1.5, a).unwrap();
        for &y1 in &[-1.0, 0.5, 2.0] {
            let marg = simpson(
                |y2| skewt_logpdf_multi(&[y1, y2], &[0.0, 0.0], &s, &lam, a).unwrap().exp(),
                -300.0,
                300.0,
                60_000,
            );
            let uni = skewt_logpdf_uni(y1, &p1).unwrap().exp();
            assert!((marg - uni).abs() < 1e-4);
        }
    }

    #[test]
    fn joint_matches_dense_multi() {
        use crate::covariance::{build_spatial_corr, MaternParams};
        let sites = [[0.0, 0.0], [1.0, 0.3], [0.2, 1.1]];
        let m = MaternParams::new(1.3, 0.8, 0.7).unwrap();
        let ss = build_spatial_corr(&sites, &m).unwrap();
        let si = DMatrix::from_row_slice(2, 2, &[1.2, -0.3, -0.3, 0.7]);
        let g = SeparableGaussian::new(ss.clone(), si.clone(), None).unwrap();
        let lam = [0.9, -1.4];
        let dense = ss.kronecker(&si);
        let u: Vec<f64> = (0..6).map(|k| lam[k % 2]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &a in &[3.0, 0.6, 17.5, f64::INFINITY] {
            let law = JointSkewT::new(&g, &lam, a).unwrap();
            let e: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let fast = law.log_density(&g, &e).unwrap();
            let slow = skewt_logpdf_multi(&e, &[0.0; 6], &dense, &u, a).unwrap();
            assert!((fast - slow).abs() < 1e-8 * slow.abs().max(1.0));
        }
    }
}
