use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mstp_core::covariance::{
    build_spatial_corr, kron_logdet, kron_mvn_sample, kron_quadform, kron_solve, MaternParams, SeparableGaussian,
};

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.3
}

fn dense(g: &SeparableGaussian, use_b: bool) -> DMatrix<f64> {
    let mut m = g.spatial.matrix().kronecker(g.index.matrix());
    if use_b {
        m = m.kronecker(g.spline.as_ref().unwrap().matrix());
    }
    m
}

fn case(seed: u64, n: usize, p: usize, l: usize) -> SeparableGaussian {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)]).collect();
    let matern =
        MaternParams::new(rng.random_range(0.3..3.0), rng.random_range(0.2..2.5), rng.random_range(0.3..1.0)).unwrap();
    let s = build_spatial_corr(&sites, &matern).unwrap();
    SeparableGaussian::new(s, random_spd(&mut rng, p), Some(random_spd(&mut rng, l))).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn structured_ops_match_dense(seed in any::<u64>(), n in 1usize..=4, p in 1usize..=4, l in 1usize..=4, use_b: bool, scale in 0.2f64..5.0) {
        let g = case(seed, n, p, l);
        let m = dense(&g, use_b);
        let dim = m.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let chol = (m.clone() * scale).cholesky().unwrap();
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        prop_assert!(rel(kron_logdet(&g, scale, use_b).unwrap(), logdet) < 1e-8);

        let dv = DVector::from_vec(v.clone());
        let x = m.clone().cholesky().unwrap().solve(&dv);
        prop_assert!(rel(kron_quadform(&g, &v, use_b).unwrap(), dv.dot(&x)) < 1e-8);
        for (a, b) in kron_solve(&g, &v, use_b).unwrap().iter().zip(x.iter()) {
            prop_assert!(rel(*a, *b) < 1e-8 * x.amax().max(1.0));
        }

        let mut c = v.clone();
        g.color(&mut c, use_b).unwrap();
        let lower = m.clone().cholesky().unwrap().l();
        let expect = &lower * &dv;
        // the dense Cholesky factor of a Kronecker product is the product of factors
        for (a, b) in c.iter().zip(expect.iter()) {
            prop_assert!((a - b).abs() < 1e-8 * expect.amax().max(1.0));
        }
        let mut w = c.clone();
        g.whiten(&mut w, use_b).unwrap();
        for (a, b) in w.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn sample_covariance_matches_kronecker_product() {
    let g = case(11, 3, 2, 2);
    let m = dense(&g, false);
    let mean = vec![0.5; 6];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 200_000;
    let mut acc = DMatrix::<f64>::zeros(6, 6);
    let mut first = DVector::<f64>::zeros(6);
    for _ in 0..draws {
        let x = DVector::from_vec(kron_mvn_sample(&mut rng, &mean, &g, 2.0).unwrap());
        first += &x;
        acc += &x * x.transpose();
    }
    let mu = first / draws as f64;
    let cov = acc / draws as f64 - &mu * mu.transpose();
    for i in 0..6 {
        assert!((mu[i] - 0.5).abs() < 0.02, "mean {i}: {}", mu[i]);
        for j in 0..6 {
            let se = ((m[(i, i)] * m[(j, j)] + m[(i, j)] * m[(i, j)]) * 4.0 / draws as f64).sqrt();
            assert!((cov[(i, j)] - 2.0 * m[(i, j)]).abs() < 5.0 * se, "cov {i},{j}");
        }
    }
}
