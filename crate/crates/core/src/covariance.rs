//! Matérn spatial correlation with a nugget, and Kronecker-structured
//! Gaussian algebra.
//!
//! Vectors over (site, index) are laid out site-slowest, index-fastest, which
//! is the ordering under which their covariance is `Σ_S ⊗ Σ_I`. Vectors over
//! (site, index, spline) put the spline coordinate fastest, matching
//! `Σ_S ⊗ Σ_I ⊗ Σ_B`. No Kronecker product is ever formed densely; every
//! operation works factor by factor along one tensor axis at a time.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, shape, Error, Result};
use crate::special::{bessel_k_scaled, ln_gamma};

/// Site coordinates; distances are Euclidean in whatever units are supplied.
pub type Coord = [f64; 2];

/// Arguments of the Matérn term beyond this are flushed to zero.
const MATERN_FLUSH: f64 = 700.0;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    /// Range, in site-distance units.
    pub rho: f64,
    /// Smoothness.
    pub nu: f64,
    /// Ratio of spatial to total variance; `1 - gamma` is the nugget.
    pub gamma: f64,
}

impl MaternParams {
    pub fn new(rho: f64, nu: f64, gamma: f64) -> Result<Self> {
        let p = MaternParams { rho, nu, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(domain(format!("Matérn range must be positive, got {}", self.rho)));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(domain(format!("Matérn smoothness must be positive, got {}", self.nu)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(domain(format!("spatial variance ratio must lie in [0,1], got {}", self.gamma)));
        }
        Ok(())
    }
}

pub(crate) fn matern_unchecked(h: f64, p: &MaternParams) -> f64 {
    if h == 0.0 {
        return 1.0;
    }
    if p.gamma == 0.0 {
        return 0.0;
    }
    let x = h / p.rho;
    if x > MATERN_FLUSH {
        return 0.0;
    }
    let ln_term = p.gamma.ln() - ln_gamma(p.nu) - (p.nu - 1.0) * core::f64::consts::LN_2
        + p.nu * x.ln()
        + bessel_k_scaled(p.nu, x).ln()
        - x;
    let v = ln_term.exp();
    // x^nu K_nu(x) decreases from its x -> 0 limit, so the term never exceeds gamma.
    if v.is_finite() {
        v.min(p.gamma)
    } else {
        p.gamma
    }
}

/// Matérn correlation with nugget at distance `h`.
pub fn matern_correlation(h: f64, params: &MaternParams) -> Result<f64> {
    if !(h.is_finite() && h >= 0.0) {
        return Err(domain(format!("distance must be finite and non-negative, got {h}")));
    }
    params.validate()?;
    Ok(matern_unchecked(h, params))
}

pub fn distance(a: &Coord, b: &Coord) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Largest pairwise distance; zero for fewer than two sites.
pub fn max_distance(sites: &[Coord]) -> f64 {
    let mut d = 0.0_f64;
    for i in 0..sites.len() {
        for j in (i + 1)..sites.len() {
            d = d.max(distance(&sites[i], &sites[j]));
        }
    }
    d
}

/// Pairs `(i, j)`, `i < j`, of sites at distance zero. Such pairs make the
/// spatial correlation matrix singular when `gamma = 1`.
pub fn duplicate_site_pairs(sites: &[Coord]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..sites.len() {
        for j in (i + 1)..sites.len() {
            if distance(&sites[i], &sites[j]) == 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Pairwise distance matrix.
pub fn distance_matrix(sites: &[Coord]) -> DMatrix<f64> {
    let n = sites.len();
    DMatrix::from_fn(n, n, |i, j| distance(&sites[i], &sites[j]))
}

pub(crate) fn corr_from_distances(dist: &DMatrix<f64>, params: &MaternParams) -> DMatrix<f64> {
    let n = dist.nrows();
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = matern_unchecked(dist[(i, j)], params);
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    m
}

/// The `n × n` spatial correlation matrix `Σ_S` (unit diagonal).
pub fn build_spatial_corr(sites: &[Coord], params: &MaternParams) -> Result<DMatrix<f64>> {
    if sites.is_empty() {
        return Err(shape("at least one site is required"));
    }
    params.validate()?;
    for s in sites {
        if !(s[0].is_finite() && s[1].is_finite()) {
            return Err(domain("site coordinates must be finite"));
        }
    }
    Ok(corr_from_distances(&distance_matrix(sites), params))
}

/// A symmetric positive-definite matrix with its cached lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    matrix: DMatrix<f64>,
    lower: DMatrix<f64>,
    log_det: f64,
    jitter: f64,
}

impl SpdFactor {
    /// Factorizes `matrix`, escalating diagonal jitter from `1e-10` to `1e-6`
    /// times the mean diagonal when the plain factorization fails. `name`
    /// identifies the factor in the error.
    pub fn new(name: &str, matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(shape(format!("{name} must be a non-empty square matrix")));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization { factor: name.into(), max_jitter: 0.0 });
        }
        let n = matrix.nrows();
        let mean_diag = matrix.diagonal().sum() / n as f64;
        let mut jitter = 0.0;
        loop {
            let mut m = matrix.clone();
            if jitter > 0.0 {
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
            }
            if let Some(ch) = m.clone().cholesky() {
                let lower = ch.unpack();
                let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
                if log_det.is_finite() {
                    return Ok(SpdFactor { matrix: m, lower, log_det, jitter });
                }
            }
            let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
            jitter = if jitter == 0.0 { JITTER_START * scale } else { jitter * 10.0 };
            if jitter > JITTER_MAX * scale * (1.0 + 1e-9) {
                return Err(Error::Factorization { factor: name.into(), max_jitter: JITTER_MAX * scale });
            }
        }
    }

    pub fn identity(n: usize) -> Self {
        SpdFactor { matrix: DMatrix::identity(n, n), lower: DMatrix::identity(n, n), log_det: 0.0, jitter: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The factorized matrix (including any jitter that was added).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Diagonal jitter that was needed; zero when the matrix factorized as given.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `v <- L^{-1} v`
    pub fn solve_lower(&self, v: &mut [f64]) {
        let n = self.dim();
        let l = &self.lower;
        for i in 0..n {
            let mut s = v[i];
            for k in 0..i {
                s -= l[(i, k)] * v[k];
            }
            v[i] = s / l[(i, i)];
        }
    }

    /// `v <- L^{-T} v`
    pub fn solve_upper(&self, v: &mut [f64]) {
        let n = self.dim();
        let l = &self.lower;
        for i in (0..n).rev() {
            let mut s = v[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * v[k];
            }
            v[i] = s / l[(i, i)];
        }
    }

    /// `v <- Σ^{-1} v`
    pub fn solve(&self, v: &mut [f64]) {
        self.solve_lower(v);
        self.solve_upper(v);
    }

    /// `v <- L v`
    pub fn mul_lower(&self, v: &mut [f64]) {
        let n = self.dim();
        let l = &self.lower;
        for i in (0..n).rev() {
            let mut s = 0.0;
            for k in 0..=i {
                s += l[(i, k)] * v[k];
            }
            v[i] = s;
        }
    }

    /// `v' Σ^{-1} v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut w = v.to_vec();
        self.solve_lower(&mut w);
        w.iter().map(|x| x * x).sum()
    }

    /// `Σ^{-1} 1`
    pub fn solve_ones(&self) -> Vec<f64> {
        let mut w = vec![1.0; self.dim()];
        self.solve(&mut w);
        w
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.solve(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // symmetrize away round-off
        let t = inv.transpose();
        (inv + t) * 0.5
    }
}

/// Applies `op` to every fibre of `data` along `axis` of a row-major tensor
/// with shape `dims`.
pub(crate) fn apply_axis(data: &mut [f64], dims: &[usize], axis: usize, mut op: impl FnMut(&mut [f64])) {
    let len = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut buf = vec![0.0; len];
    if inner == 1 {
        for o in 0..outer {
            op(&mut data[o * len..(o + 1) * len]);
        }
        return;
    }
    for o in 0..outer {
        let base = o * len * inner;
        for k in 0..inner {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = data[base + j * inner + k];
            }
            op(&mut buf);
            for (j, b) in buf.iter().enumerate() {
                data[base + j * inner + k] = *b;
            }
        }
    }
}

/// Zero-mean Gaussian law with covariance `Σ_S ⊗ Σ_I [⊗ Σ_B]`, held as
/// factorized Kronecker factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableGaussian {
    pub spatial: SpdFactor,
    pub index: SpdFactor,
    pub spline: Option<SpdFactor>,
}

impl SeparableGaussian {
    pub fn new(sigma_s: DMatrix<f64>, sigma_i: DMatrix<f64>, sigma_b: Option<DMatrix<f64>>) -> Result<Self> {
        Ok(SeparableGaussian {
            spatial: SpdFactor::new("spatial correlation Σ_S", sigma_s)?,
            index: SpdFactor::new("index covariance Σ_I", sigma_i)?,
            spline: sigma_b.map(|b| SpdFactor::new("spline covariance Σ_B", b)).transpose()?,
        })
    }

    pub fn from_factors(spatial: SpdFactor, index: SpdFactor, spline: Option<SpdFactor>) -> Self {
        SeparableGaussian { spatial, index, spline }
    }

    fn factors(&self, use_b: bool) -> Result<Vec<&SpdFactor>> {
        let mut f = vec![&self.spatial, &self.index];
        if use_b {
            f.push(self.spline.as_ref().ok_or_else(|| shape("spline factor Σ_B requested but absent"))?);
        }
        Ok(f)
    }

    /// Tensor shape of vectors this law acts on.
    pub fn dims(&self, use_b: bool) -> Result<Vec<usize>> {
        Ok(self.factors(use_b)?.iter().map(|f| f.dim()).collect())
    }

    fn check_len(&self, v: &[f64], use_b: bool) -> Result<(Vec<&SpdFactor>, Vec<usize>)> {
        let factors = self.factors(use_b)?;
        let dims: Vec<usize> = factors.iter().map(|f| f.dim()).collect();
        let total: usize = dims.iter().product();
        if v.len() != total {
            return Err(shape(format!("vector of length {} does not match Kronecker dimension {total}", v.len())));
        }
        Ok((factors, dims))
    }

    /// `v <- (L_S ⊗ L_I [⊗ L_B])^{-1} v`
    pub fn whiten(&self, v: &mut [f64], use_b: bool) -> Result<()> {
        let (factors, dims) = self.check_len(v, use_b)?;
        for (axis, f) in factors.iter().enumerate() {
            apply_axis(v, &dims, axis, |x| f.solve_lower(x));
        }
        Ok(())
    }

    /// `v <- (Σ_S ⊗ Σ_I [⊗ Σ_B])^{-1} v`
    pub fn solve(&self, v: &mut [f64], use_b: bool) -> Result<()> {
        let (factors, dims) = self.check_len(v, use_b)?;
        for (axis, f) in factors.iter().enumerate() {
            apply_axis(v, &dims, axis, |x| f.solve(x));
        }
        Ok(())
    }

    /// `v <- (L_S ⊗ L_I [⊗ L_B]) v`
    pub fn color(&self, v: &mut [f64], use_b: bool) -> Result<()> {
        let (factors, dims) = self.check_len(v, use_b)?;
        for (axis, f) in factors.iter().enumerate() {
            apply_axis(v, &dims, axis, |x| f.mul_lower(x));
        }
        Ok(())
    }
}

/// `log det(σ² · Σ_S ⊗ Σ_I [⊗ Σ_B])`.
pub fn kron_logdet(g: &SeparableGaussian, scale: f64, use_b: bool) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(domain(format!("scale must be positive, got {scale}")));
    }
    let factors = g.factors(use_b)?;
    let total: usize = factors.iter().map(|f| f.dim()).product();
    let mut ld = total as f64 * scale.ln();
    for f in &factors {
        ld += (total / f.dim()) as f64 * f.log_det();
    }
    Ok(ld)
}

/// `v' (Σ_S ⊗ Σ_I [⊗ Σ_B])^{-1} v`.
pub fn kron_quadform(g: &SeparableGaussian, v: &[f64], use_b: bool) -> Result<f64> {
    let mut w = v.to_vec();
    g.whiten(&mut w, use_b)?;
    Ok(w.iter().map(|x| x * x).sum())
}

/// `(Σ_S ⊗ Σ_I [⊗ Σ_B])^{-1} v`.
pub fn kron_solve(g: &SeparableGaussian, v: &[f64], use_b: bool) -> Result<Vec<f64>> {
    let mut w = v.to_vec();
    g.solve(&mut w, use_b)?;
    Ok(w)
}

/// One draw from `N(mean, σ² · Σ_S ⊗ Σ_I [⊗ Σ_B])`. `use_b` is implied by the
/// length of `mean`.
pub fn kron_mvn_sample<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &[f64],
    g: &SeparableGaussian,
    scale: f64,
) -> Result<Vec<f64>> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(domain(format!("scale must be non-negative, got {scale}")));
    }
    let two = g.spatial.dim() * g.index.dim();
    let use_b = match &g.spline {
        Some(b) if mean.len() == two * b.dim() => true,
        _ if mean.len() == two => false,
        _ => return Err(shape(format!("mean of length {} matches no factor arrangement", mean.len()))),
    };
    if scale == 0.0 {
        return Ok(mean.to_vec());
    }
    let mut xi: Vec<f64> = (0..mean.len()).map(|_| rng.sample(StandardNormal)).collect();
    g.color(&mut xi, use_b)?;
    let sd = scale.sqrt();
    Ok(xi.iter().zip(mean).map(|(x, m)| m + sd * x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_at_zero_distance() {
        for &(rho, nu, gamma) in &[(1.0, 0.5, 0.3), (3.0, 2.5, 1.0), (0.1, 0.01, 0.0)] {
            let p = MaternParams::new(rho, nu, gamma).unwrap();
            assert_eq!(matern_correlation(0.0, &p).unwrap(), 1.0);
        }
    }

    #[test]
    fn exponential_case() {
        let p = MaternParams::new(1.0, 0.5, 1.0).unwrap();
        assert!((matern_correlation(1.0, &p).unwrap() - (-1.0_f64).exp()).abs() < 1e-12);
        let p = MaternParams::new(2.3, 0.5, 0.7).unwrap();
        for &h in &[1e-6, 0.1, 1.0, 5.0, 40.0] {
            let r = matern_correlation(h, &p).unwrap();
            assert!((r - 0.7 * (-h / 2.3).exp()).abs() < 1e-12, "h={h}");
        }
    }

    #[test]
    fn limit_at_zero_plus_is_gamma() {
        let p = MaternParams::new(1.0, 1.5, 0.8).unwrap();
        assert!((matern_correlation(1e-12, &p).unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn flushed_far_tail() {
        let p = MaternParams::new(1.0, 1.5, 0.8).unwrap();
        assert_eq!(matern_correlation(701.0, &p).unwrap(), 0.0);
        assert!(matern_correlation(600.0, &p).unwrap() >= 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MaternParams::new(0.0, 1.0, 0.5).is_err());
        assert!(MaternParams::new(1.0, -1.0, 0.5).is_err());
        assert!(MaternParams::new(1.0, 1.0, 1.5).is_err());
        let p = MaternParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(matern_correlation(f64::NAN, &p).is_err());
        assert!(matern_correlation(-1.0, &p).is_err());
    }

    #[test]
    fn spatial_corr_small_cases() {
        let p = MaternParams::new(1.0, 0.5, 1.0).unwrap();
        let one = build_spatial_corr(&[[0.0, 0.0]], &p).unwrap();
        assert_eq!(one, DMatrix::from_element(1, 1, 1.0));
        let two = build_spatial_corr(&[[0.0, 0.0], [3.0, 4.0]], &p).unwrap();
        assert!((two[(0, 1)] - (-5.0_f64).exp()).abs() < 1e-12);
        assert_eq!(two[(0, 1)], two[(1, 0)]);
    }

    #[test]
    fn collinear_sites_positive_definite() {
        let p = MaternParams::new(1.0, 1.5, 0.6).unwrap();
        let sites = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let m = build_spatial_corr(&sites, &p).unwrap();
        let r1 = matern_correlation(1.0, &p).unwrap();
        let r2 = matern_correlation(2.0, &p).unwrap();
        assert!(0.6 * (r1 + r2) < 1.0 || r1 + r2 < 1.0);
        let f = SpdFactor::new("s", m.clone()).unwrap();
        assert_eq!(f.jitter(), 0.0);
        let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
        assert!(eig.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn duplicates_are_reported() {
        let sites = [[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]];
        assert_eq!(duplicate_site_pairs(&sites), vec![(0, 2)]);
    }

    #[test]
    fn jitter_rescues_near_singular() {
        // gamma = 1 duplicate sites: rank deficient, but jitter makes it factorize.
        let p = MaternParams::new(1.0, 0.5, 1.0).unwrap();
        let m = build_spatial_corr(&[[0.0, 0.0], [0.0, 0.0]], &p).unwrap();
        let f = SpdFactor::new("Σ_S", m).unwrap();
        assert!(f.jitter() > 0.0 && f.jitter() <= 1e-6);
    }

    #[test]
    fn non_pd_factor_named_in_error() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match SpdFactor::new("Σ_I", m) {
            Err(Error::Factorization { factor, .. }) => assert_eq!(factor, "Σ_I"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn logdet_simple_cases() {
        let g = SeparableGaussian::new(DMatrix::identity(2, 2), DMatrix::identity(3, 3), None).unwrap();
        assert_eq!(kron_logdet(&g, 1.0, false).unwrap(), 0.0);
        let g = SeparableGaussian::new(
            DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![4.0, 9.0])),
            None,
        )
        .unwrap();
        let expect = 2.0 * (4.0_f64.ln() + 9.0_f64.ln());
        assert!((kron_logdet(&g, 1.0, false).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn quadform_simple_cases() {
        let g = SeparableGaussian::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), None).unwrap();
        assert!((kron_quadform(&g, &[1.0, 0.0, 0.0, 0.0], false).unwrap() - 1.0).abs() < 1e-15);
        let g = SeparableGaussian::new(DMatrix::identity(1, 1), DMatrix::from_element(1, 1, 4.0), None).unwrap();
        assert!((kron_quadform(&g, &[2.0], false).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(kron_quadform(&g, &[1.0, 2.0], false), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_scale_returns_mean() {
        let g = SeparableGaussian::new(DMatrix::identity(2, 2), DMatrix::identity(1, 1), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = [1.5, -2.0];
        assert_eq!(kron_mvn_sample(&mut rng, &m, &g, 0.0).unwrap(), m.to_vec());
    }

    #[test]
    fn vectorization_is_site_slowest() {
        // Σ_S = diag(1, 4), Σ_I = diag(1, 9): covariance of element (site i, index p)
        // is Σ_S[i,i] * Σ_I[p,p] at flat position i*P + p.
        let g = SeparableGaussian::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![1.0, 4.0])),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![1.0, 9.0])),
            None,
        )
        .unwrap();
        let mut e = alloc::vec![0.0; 4];
        e[1] = 3.0; // site 0, index 1
        assert!((kron_quadform(&g, &e, false).unwrap() - 1.0).abs() < 1e-14);
        let mut e = alloc::vec![0.0; 4];
        e[2] = 2.0; // site 1, index 0
        assert!((kron_quadform(&g, &e, false).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn monotone_decay_on_grid() {
        for &(nu, gamma) in &[(0.2, 0.9), (0.5, 1.0), (1.7, 0.5), (6.0, 0.8)] {
            let p = MaternParams::new(2.0, nu, gamma).unwrap();
            let mut prev = f64::INFINITY;
            for k in 1..400 {
                let r = matern_correlation(k as f64 * 0.05, &p).unwrap();
                assert!(r <= prev + 1e-15, "nu={nu} k={k}");
                prev = r;
            }
        }
    }
}
