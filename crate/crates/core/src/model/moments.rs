use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::covariance::{distance, matern_correlation, Coord};
use crate::error::{domain, shape, Result};
use crate::model::spline::SplineBasis;
use crate::model::state::{mean_surface, ChainState};
use crate::special::ln_gamma;

/// `E|z_t|` under `z_t | σ_t ~ N(0, σ_t²)`, `σ_t² ~ IG(a/2, a/2)`, which is
/// `sqrt(a/π) Γ((a-1)/2) / Γ(a/2)`; finite only for `a > 1`.
pub fn abs_z_mean(a: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(domain(format!("the mean requires more than one degree of freedom, got {a}")));
    }
    if a.is_infinite() {
        return Ok((2.0 / PI).sqrt());
    }
    Ok((a / PI).sqrt() * (ln_gamma(0.5 * (a - 1.0)) - ln_gamma(0.5 * a)).exp())
}

/// `E σ_t² = a / (a - 2)`; finite only for `a > 2`.
pub fn sigma2_mean(a: f64) -> Result<f64> {
    if !(a > 2.0) {
        return Err(domain(format!("the covariance requires more than two degrees of freedom, got {a}")));
    }
    Ok(if a.is_infinite() { 1.0 } else { a / (a - 2.0) })
}

/// First and second moments of the process at two (site, index) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMoments {
    /// `E Y_{t p₁}(s_i)` for every t.
    pub mean_first: Vec<f64>,
    /// `E Y_{t p₂}(s_j)` for every t.
    pub mean_second: Vec<f64>,
    /// `Cov(Y_{t p₁}(s_i), Y_{t p₂}(s_j))`, constant over t.
    pub covariance: f64,
}

/// Moments implied by the state. The covariance accounts for the variance of
/// the shared `|z_t|` term, `λ₁λ₂ [a/(a-2) - (E|z|)²]`, on top of the scale
/// mixture `a/(a-2) Σ_I r(h)`.
pub fn model_moments(
    state: &ChainState,
    basis: &SplineBasis,
    sites: &[Coord],
    site_pair: (usize, usize),
    index_pair: (usize, usize),
) -> Result<ModelMoments> {
    let d = state.dims();
    let (i, j) = site_pair;
    let (p1, p2) = index_pair;
    if i >= d.sites || j >= d.sites || p1 >= d.indexes || p2 >= d.indexes || sites.len() != d.sites {
        return Err(shape("site or index out of range"));
    }
    let shift = abs_z_mean(state.a)?;
    let ez2 = sigma2_mean(state.a)?;
    let mu = mean_surface(state, basis)?;
    let mean_at = |site: usize, p: usize| -> Vec<f64> {
        (0..basis.n_times()).map(|t| mu[d.y_at(t, site, p)] + state.lambda[p] * shift).collect()
    };
    let r = if i == j { 1.0 } else { matern_correlation(distance(&sites[i], &sites[j]), &state.matern)? };
    let ll = state.lambda[p1] * state.lambda[p2];
    let covariance = ez2 * (ll + state.sigma_i[(p1, p2)] * r) - ll * shift * shift;
    Ok(ModelMoments { mean_first: mean_at(i, p1), mean_second: mean_at(j, p2), covariance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spline::spline_basis;
    use crate::model::state::tests::toy_state;

    #[test]
    fn symmetric_variance_is_t_variance() {
        let times: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let basis = spline_basis(&times, 4).unwrap();
        let mut s = toy_state(2, 2, 4, 8);
        s.a = 6.0;
        s.sigma_i[(1, 1)] = 2.0;
        let sites = [[0.0, 0.0], [3.0, 0.0]];
        let m = model_moments(&s, &basis, &sites, (0, 0), (1, 1)).unwrap();
        assert!((m.covariance - 6.0 / 4.0 * 2.0).abs() < 1e-12);
        assert!(m.mean_first.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distant_sites_stay_correlated_through_skewness() {
        let times: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let basis = spline_basis(&times, 4).unwrap();
        let mut s = toy_state(2, 1, 4, 8);
        s.lambda[0] = 1.5;
        s.a = 8.0;
        let sites = [[0.0, 0.0], [1e5, 0.0]];
        let m = model_moments(&s, &basis, &sites, (0, 1), (0, 0)).unwrap();
        let expected = 2.25 * (8.0 / 6.0 - abs_z_mean(8.0).unwrap().powi(2));
        assert!((m.covariance - expected).abs() < 1e-12 && m.covariance > 0.0);
    }

    #[test]
    fn undefined_moments() {
        let times: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let basis = spline_basis(&times, 4).unwrap();
        let mut s = toy_state(1, 1, 4, 8);
        s.a = 1.5;
        assert!(model_moments(&s, &basis, &[[0.0, 0.0]], (0, 0), (0, 0)).is_err());
        s.a = 1.0;
        assert!(abs_z_mean(s.a).is_err());
        assert!((abs_z_mean(1e7).unwrap() - abs_z_mean(f64::INFINITY).unwrap()).abs() < 1e-6);
    }
}
