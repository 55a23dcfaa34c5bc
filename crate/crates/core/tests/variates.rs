use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Gamma, Normal};

use mstp_core::covariance::SpdFactor;
use mstp_core::random::{inverse_gamma, inverse_wishart, truncated_normal_lower};
use mstp_core::sampler::{a_log_masses, default_a_grid};

const DRAWS: usize = 20_000;

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
fn ks(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical distance at the 0.1% level.
fn ks_limit(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

fn truncated_cdf(mu: f64, sigma: f64, lower: f64) -> impl Fn(f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let a = (lower - mu) / sigma;
    // upper tails keep precision when the bound sits far above the mean
    let tail = n.sf(a);
    move |x| 1.0 - n.sf((x - mu) / sigma) / tail
}

#[test]
fn truncated_normal_follows_its_law() {
    for (k, &(mu, sigma, lower)) in
        [(0.0, 1.0, 0.0), (1.5, 0.7, 0.0), (-8.0, 1.0, 0.0), (-2.0, 0.5, 0.0), (3.0, 2.0, 4.0)].iter().enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let x: Vec<f64> = (0..DRAWS).map(|_| truncated_normal_lower(&mut rng, mu, sigma, lower).unwrap()).collect();
        assert!(x.iter().all(|&v| v >= lower));
        let d = ks(x, truncated_cdf(mu, sigma, lower));
        assert!(d < ks_limit(DRAWS), "({mu}, {sigma}, {lower}): D = {d}");
    }
}

#[test]
fn inverse_gamma_follows_its_law() {
    for (k, &(shape, rate)) in [(0.6, 0.6), (3.0, 2.0), (40.0, 10.0)].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10 + k as u64);
        let x: Vec<f64> = (0..DRAWS).map(|_| inverse_gamma(&mut rng, shape, rate).unwrap()).collect();
        let g = Gamma::new(shape, rate).unwrap();
        let d = ks(x, |v| g.sf(1.0 / v));
        assert!(d < ks_limit(DRAWS), "IG({shape}, {rate}): D = {d}");
    }
}

#[test]
fn one_dimensional_inverse_wishart_is_inverse_gamma() {
    for (k, &(df, scale)) in [(3.0, 2.0), (12.0, 0.5)].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(20 + k as u64);
        let f = SpdFactor::new("scale", DMatrix::from_element(1, 1, scale)).unwrap();
        let x: Vec<f64> = (0..DRAWS).map(|_| inverse_wishart(&mut rng, df, &f).unwrap()[(0, 0)]).collect();
        let g = Gamma::new(df / 2.0, scale / 2.0).unwrap();
        let d = ks(x, |v| g.sf(1.0 / v));
        assert!(d < ks_limit(DRAWS), "IW({df}, {scale}): D = {d}");
    }
}

#[test]
fn grid_posterior_of_dof_peaks_at_the_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let grid = default_a_grid(20.0);
    for a in [4.0, 8.0, 12.0] {
        let sigma2: Vec<f64> = (0..2000).map(|_| inverse_gamma(&mut rng, a / 2.0, a / 2.0).unwrap()).collect();
        let masses = a_log_masses(&sigma2, &grid);
        let best = masses.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
        assert!((grid[best] - a).abs() <= 1.0, "truth {a}, mode {}", grid[best]);
    }
}
