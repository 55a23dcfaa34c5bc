//! Extremal dependence: rank-based F-madogram estimates of χ and the
//! closed-form χ implied by the skew-t process.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{distance, matern_correlation, MaternParams};
use crate::error::{domain, shape, Result};
use crate::model::ObservationTensor;
use crate::random::inverse_gamma;
use crate::special::t_ln_cdf;

/// Fewest time points accepted for empirical χ.
pub const MIN_TIMES: usize = 20;

/// A χ estimate: the raw value and the value clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiValue {
    pub raw: f64,
    pub reported: f64,
}

impl ChiValue {
    fn new(raw: f64) -> Self {
        ChiValue { raw, reported: raw.clamp(0.0, 1.0) }
    }
}

/// Empirical CDF values `rank / (T + 1)` with ties sharing their average rank.
pub fn empirical_cdf(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let rank = 0.5 * (start + 1 + end) as f64;
        for &k in &order[start..end] {
            out[k] = rank / (n + 1) as f64;
        }
        start = end;
    }
    out
}

/// Whether a series is constant, which leaves its ranks uninformative.
pub fn is_degenerate(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

/// `ν_F = mean|F̂₁(u_t) - F̂₂(v_t)| / 2`.
pub fn f_madogram(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(shape(format!("series lengths differ: {} vs {}", u.len(), v.len())));
    }
    if u.len() < 2 {
        return Err(shape("the F-madogram needs at least two observations"));
    }
    let (fu, fv) = (empirical_cdf(u), empirical_cdf(v));
    let sum: f64 = fu.iter().zip(&fv).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * sum / u.len() as f64)
}

/// `χ = 2 - (1 + 2ν_F) / (1 - 2ν_F)`.
pub fn chi_from_madogram(nu_f: f64) -> Result<ChiValue> {
    if !(nu_f < 0.5) || !nu_f.is_finite() {
        return Err(domain(format!("the F-madogram must be below 1/2, got {nu_f}")));
    }
    Ok(ChiValue::new(2.0 - (1.0 + 2.0 * nu_f) / (1.0 - 2.0 * nu_f)))
}

/// Cross-index χ per site and averaged over sites.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossChi {
    pub per_site: Vec<ChiValue>,
    pub mean: ChiValue,
    /// Sites where one of the two series is constant.
    pub degenerate_sites: Vec<usize>,
}

pub fn empirical_chi_cross(data: &ObservationTensor, p1: usize, p2: usize) -> Result<CrossChi> {
    if p1 >= data.n_indexes() || p2 >= data.n_indexes() {
        return Err(shape("index out of range"));
    }
    if data.n_times() < MIN_TIMES {
        return Err(domain(format!("empirical χ needs at least {MIN_TIMES} time points, got {}", data.n_times())));
    }
    let mut per_site = Vec::with_capacity(data.n_sites());
    let mut degenerate_sites = Vec::new();
    for s in 0..data.n_sites() {
        let (u, v) = (data.series(s, p1), data.series(s, p2));
        if is_degenerate(&u) || is_degenerate(&v) {
            degenerate_sites.push(s);
        }
        per_site.push(chi_from_madogram(f_madogram(&u, &v)?)?);
    }
    let mean = per_site.iter().map(|c| c.raw).sum::<f64>() / per_site.len() as f64;
    Ok(CrossChi { per_site, mean: ChiValue::new(mean), degenerate_sites })
}

/// Distance binning for spatial χ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinSpec {
    /// Bin width; defaults to the smallest nonzero inter-site distance.
    pub width: Option<f64>,
    /// Centred three-bin moving average across the non-empty bins.
    pub smooth: bool,
}

/// Binned spatial χ as a function of distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiCurve {
    /// Bin centres, strictly increasing.
    pub distances: Vec<f64>,
    /// Estimates clamped to `[0, 1]`.
    pub chi: Vec<f64>,
    /// Unclamped estimates.
    pub raw: Vec<f64>,
    /// Site pairs per bin.
    pub counts: Vec<usize>,
    /// Centres of bins without any pair, which are left out.
    pub empty_bins: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn empirical_chi_spatial(data: &ObservationTensor, p: usize, bins: BinSpec) -> Result<ChiCurve> {
    let n = data.n_sites();
    if n < 2 {
        return Err(shape("spatial χ needs at least two sites"));
    }
    if p >= data.n_indexes() {
        return Err(shape("index out of range"));
    }
    if data.n_times() < MIN_TIMES {
        return Err(domain(format!("empirical χ needs at least {MIN_TIMES} time points, got {}", data.n_times())));
    }
    let sites = data.sites();
    let smallest = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| distance(&sites[i], &sites[j]))
        .filter(|&h| h > 0.0)
        .fold(f64::INFINITY, f64::min);
    let width = match bins.width {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => return Err(domain(format!("bin width must be positive, got {w}"))),
        None if smallest.is_finite() => smallest,
        None => 1.0,
    };
    let fcdf: Vec<Vec<f64>> = (0..n).map(|s| empirical_cdf(&data.series(s, p))).collect();
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let h = distance(&sites[i], &sites[j]);
            let bin = (h / width + 0.5).floor() as usize;
            if bin >= sums.len() {
                sums.resize(bin + 1, 0.0);
                counts.resize(bin + 1, 0);
            }
            let nu =
                0.5 * fcdf[i].iter().zip(&fcdf[j]).map(|(a, b)| (a - b).abs()).sum::<f64>() / data.n_times() as f64;
            sums[bin] += chi_from_madogram(nu)?.raw;
            counts[bin] += 1;
        }
    }
    let mut distances = Vec::new();
    let mut raw = Vec::new();
    let mut kept = Vec::new();
    let mut empty_bins = Vec::new();
    for (k, (&s, &c)) in sums.iter().zip(&counts).enumerate() {
        if c == 0 {
            empty_bins.push(k as f64 * width);
        } else {
            distances.push(k as f64 * width);
            raw.push(s / c as f64);
            kept.push(c);
        }
    }
    if !empty_bins.is_empty() {
        warnings.push(format!("{} empty distance bins dropped", empty_bins.len()));
    }
    if (0..n).any(|s| is_degenerate(&data.series(s, p))) {
        warnings.push("constant series present; their ranks are uninformative".into());
    }
    if bins.smooth && raw.len() > 2 {
        let m = raw.len();
        raw = (0..m)
            .map(|k| {
                let (lo, hi) = (k.saturating_sub(1), (k + 1).min(m - 1));
                raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
    }
    let chi = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(ChiCurve { distances, chi, raw, counts: kept, empty_bins, warnings })
}

/// Closed-form cross-index χ at a common standardized skewness `λ*`,
/// correlation `r` and degrees of freedom `a`:
/// `2 F_T(λ*√(2(a+2)/(1+r)); a+2) / F_T(λ*√(a+1); a+1) · F̄_T(√((a+1)(1-r)/(1+r+2λ*²)); a+1)`.
pub fn chi_cross_theoretical(lambda_star: f64, r: f64, a: f64) -> Result<f64> {
    if !(r > -1.0 && r <= 1.0 + 1e-12) {
        return Err(domain(format!("correlation must lie in (-1, 1], got {r}")));
    }
    if !(a > 0.0) || !lambda_star.is_finite() {
        return Err(domain(format!("need a > 0 and finite λ*, got a = {a}, λ* = {lambda_star}")));
    }
    let r = r.min(1.0);
    if a.is_infinite() {
        return Ok(if r == 1.0 { 1.0 } else { 0.0 });
    }
    let (a1, a2) = (a + 1.0, a + 2.0);
    let ls = lambda_star;
    let num = t_ln_cdf(ls * (2.0 * a2 / (1.0 + r)).sqrt(), a2);
    let den = t_ln_cdf(ls * a1.sqrt(), a1);
    let tail = t_ln_cdf(-(a1 * (1.0 - r) / (1.0 + r + 2.0 * ls * ls)).sqrt(), a1);
    Ok((core::f64::consts::LN_2 + num - den + tail).exp())
}

/// Closed-form spatial χ at distance `h`, using `r = r(h)`.
pub fn chi_spatial_theoretical(lambda_star: f64, h: f64, matern: &MaternParams, a: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(domain(format!("distance must be non-negative, got {h}")));
    }
    chi_cross_theoretical(lambda_star, matern_correlation(h, matern)?, a)
}

/// Both χ measures vanish for the Gaussian process (`λ* = 0`, `a → ∞`, `r < 1`).
pub fn chi_gaussian_limit() -> f64 {
    0.0
}

/// Draws from a standardized bivariate skew-t (unit diagonal scale,
/// correlation `r`, standardized skewness `λ*₁, λ*₂`).
pub fn sample_bivariate_skewt<R: Rng + ?Sized>(
    rng: &mut R,
    lambda_star: (f64, f64),
    r: f64,
    a: f64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(r.abs() <= 1.0) {
        return Err(domain(format!("correlation must lie in [-1, 1], got {r}")));
    }
    let c = (1.0 - r * r).max(0.0).sqrt();
    let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let s2 = if a.is_infinite() { 1.0 } else { inverse_gamma(rng, 0.5 * a, 0.5 * a)? };
        let s = s2.sqrt();
        let z = rng.sample::<f64, _>(StandardNormal).abs() * s;
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        x.push(z * lambda_star.0 + s * e1);
        y.push(z * lambda_star.1 + s * (r * e1 + c * e2));
    }
    Ok((x, y))
}

/// Monte Carlo tail-conditional probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloChi {
    pub estimate: f64,
    pub std_error: f64,
    pub exceedances: usize,
}

/// `P(X > q_u(X) | Y > q_u(Y))` from paired draws, with empirical quantiles.
pub fn chi_monte_carlo(x: &[f64], y: &[f64], u: f64) -> Result<MonteCarloChi> {
    if x.len() != y.len() || x.is_empty() {
        return Err(shape("paired draws of equal, nonzero length are required"));
    }
    if !(0.0 < u && u < 1.0) {
        return Err(domain(format!("threshold level must lie in (0, 1), got {u}")));
    }
    let quantile = |v: &[f64]| {
        let mut w = v.to_vec();
        let k = ((u * w.len() as f64) as usize).min(w.len() - 1);
        *w.select_nth_unstable_by(k, |a, b| a.total_cmp(b)).1
    };
    let (qx, qy) = (quantile(x), quantile(y));
    let mut above = 0usize;
    let mut joint = 0usize;
    for (a, b) in x.iter().zip(y) {
        if *b > qy {
            above += 1;
            if *a > qx {
                joint += 1;
            }
        }
    }
    if above == 0 {
        return Err(domain("no exceedances at this threshold"));
    }
    let p = joint as f64 / above as f64;
    Ok(MonteCarloChi {
        estimate: p,
        std_error: (p * (1.0 - p) / above as f64).sqrt().max(1.0 / above as f64),
        exceedances: above,
    })
}
