use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use mstp_core::covariance::{build_spatial_corr, MaternParams, SpdFactor};
use mstp_core::model::{spline_basis, ObservationTensor};
use mstp_core::sampler::{mh_gamma_step, mh_rho_nu_step, PriorConfig, Problem, SpatialTarget, StepSizes, Variant};

fn problem(rho_max: f64) -> Problem {
    let sites = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let times: Vec<f64> = (0..6).map(f64::from).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = (0..4 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let data =
        ObservationTensor::new(y, (0..4).map(|i| format!("s{i}")).collect(), sites, times.clone(), vec!["x".into()])
            .unwrap();
    Problem::new(data, spline_basis(&times, 4).unwrap(), PriorConfig::new(rho_max), Variant::Gaussian).unwrap()
}

/// Uniform-scale KS distance of draws against a CDF.
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

/// Under a flat likelihood the walks must reproduce the priors: uniform `ρ`
/// on `(0, D)`, uniform `γ`, and log-normal `ν`.
#[test]
fn flat_target_recovers_priors() {
    let d_max = 3.0;
    let p = problem(d_max);
    let target = SpatialTarget::flat(4);
    let steps = StepSizes { rho: 1.2, nu: 0.8, gamma: 1.5 };
    let mut m = MaternParams::new(1.0, 0.5, 0.7).unwrap();
    let mut factor = SpdFactor::new("s", build_spatial_corr(p.data.sites(), &m).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut rho, mut nu, mut gamma) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..400_000 {
        let out = mh_rho_nu_step(&m, &factor, &target, &p, &steps, &mut rng);
        if let Some(f) = out.spatial {
            factor = f;
            m = out.matern;
        }
        let out = mh_gamma_step(&m, &factor, &target, &p, steps.gamma, &mut rng);
        if let Some(f) = out.spatial {
            factor = f;
            m = out.matern;
        }
        // thinning keeps the KS sample nearly independent
        if k % 20 == 0 {
            rho.push(m.rho);
            nu.push(m.nu);
            gamma.push(m.gamma);
        }
    }
    let n = rho.len();
    let limit = 1.95 / (n as f64).sqrt();
    let (mean, sd) = (p.priors.log_nu_mean, p.priors.log_nu_sd);
    let normal = Normal::new(mean, sd).unwrap();
    let d_rho = ks(rho, |x| x / d_max);
    let d_gamma = ks(gamma, |x| x);
    let d_nu = ks(nu, |x| normal.cdf(x.ln()));
    assert!(d_rho < limit, "rho: D = {d_rho}");
    assert!(d_gamma < limit, "gamma: D = {d_gamma}");
    assert!(d_nu < limit, "nu: D = {d_nu}");
}
