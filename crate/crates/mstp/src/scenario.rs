//! Synthetic truths on a regular site lattice, used by `simulate` and the
//! recovery checks.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use mstp_core::covariance::{build_spatial_corr, Coord, MaternParams, SeparableGaussian};
use mstp_core::diagnostics::delta_from_beta;
use mstp_core::model::{spline_basis, ChainState, ObservationTensor, SplineBasis};
use mstp_core::sampler::{ModelKind, Variant};
use mstp_core::simulate::{simulate_beta, simulate_dataset_with_latents};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Sites per row and per column of the lattice.
    pub grid: [usize; 2],
    pub spacing: f64,
    pub origin: [f64; 2],
    pub start_year: f64,
    pub years: usize,
    pub indexes: usize,
    /// Number of spline functions; falls back to the run's `splines.L`.
    pub splines: Option<usize>,
    /// Generating process. Univariate kinds generate like their joint counterpart.
    #[serde(with = "crate::config::kind_serde")]
    pub model: ModelKind,
    pub mu_beta: f64,
    /// Linear change per decade added to every site and index.
    pub trend: f64,
    pub spline_sd: f64,
    /// Correlation between neighbouring spline coefficients.
    pub spline_corr: f64,
    pub index_sd: f64,
    pub index_corr: f64,
    /// Standardized skewness `λ_p / √Σ_I(p,p)`, shared by all indexes.
    pub lambda_star: f64,
    pub a: f64,
    pub rho: f64,
    pub nu: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            grid: [3, 3],
            spacing: 2.5,
            origin: [0.0, 0.0],
            start_year: 1951.0,
            years: 67,
            indexes: 2,
            splines: None,
            model: ModelKind::Mstp,
            mu_beta: 0.0,
            trend: 0.0,
            spline_sd: 0.3,
            spline_corr: 0.5,
            index_sd: 1.0,
            index_corr: 0.3,
            lambda_star: 2.0,
            a: 12.0,
            rho: 5.0,
            nu: 0.5,
            gamma: 0.8,
            seed: 1,
        }
    }
}

/// A generated dataset with the state that produced it.
#[derive(Debug, Clone)]
pub struct SimulatedScenario {
    pub truth: ChainState,
    pub data: ObservationTensor,
    pub basis: SplineBasis,
    /// True decadal changes, site-slowest.
    pub delta: Vec<f64>,
}

impl Scenario {
    pub fn sites(&self) -> Vec<Coord> {
        let [nx, ny] = self.grid;
        (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .map(|(i, j)| [self.origin[0] + i as f64 * self.spacing, self.origin[1] + j as f64 * self.spacing])
            .collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.years).map(|k| self.start_year + k as f64).collect()
    }

    pub fn n_splines(&self, fallback: usize) -> usize {
        self.splines.unwrap_or(fallback)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(format!("simulate: {m}")));
        if self.grid[0] * self.grid[1] == 0 || self.indexes == 0 {
            return bad("grid and indexes must be nonzero");
        }
        if !(self.spacing > 0.0) {
            return bad("spacing must be positive");
        }
        if !(self.index_sd > 0.0 && self.spline_sd > 0.0) {
            return bad("index_sd and spline_sd must be positive");
        }
        if !(self.index_corr.abs() < 1.0 && self.spline_corr.abs() < 1.0) {
            return bad("correlations must lie in (-1, 1)");
        }
        if self.indexes > 1 && self.index_corr <= -1.0 / (self.indexes as f64 - 1.0) {
            return bad("index_corr too negative for an exchangeable correlation");
        }
        if self.model.variant() != Variant::Gaussian && !(self.a > 2.0) {
            return bad("a must exceed 2");
        }
        MaternParams::new(self.rho, self.nu, self.gamma).map_err(|e| CliError::Config(format!("simulate: {e}")))?;
        Ok(())
    }

    pub fn sigma_i(&self) -> DMatrix<f64> {
        let p = self.indexes;
        let v = self.index_sd * self.index_sd;
        DMatrix::from_fn(p, p, |i, j| if i == j { v } else { v * self.index_corr })
    }

    pub fn sigma_b(&self, l: usize) -> DMatrix<f64> {
        let v = self.spline_sd * self.spline_sd;
        DMatrix::from_fn(l, l, |i, j| v * self.spline_corr.powi((i as i32 - j as i32).abs()))
    }

    /// Draws `β` and assembles the state; the latent scales are filled in by
    /// [`Scenario::simulate`].
    pub fn truth<R: Rng + ?Sized>(&self, n_splines: usize, rng: &mut R) -> Result<(ChainState, SplineBasis)> {
        self.validate()?;
        let sites = self.sites();
        let times = self.times();
        let basis = spline_basis(&times, n_splines)?;
        let matern = MaternParams::new(self.rho, self.nu, self.gamma)?;
        let sigma_i = self.sigma_i();
        let sigma_b = self.sigma_b(n_splines);
        let factors =
            SeparableGaussian::new(build_spatial_corr(&sites, &matern)?, sigma_i.clone(), Some(sigma_b.clone()))?;
        let mu_beta = vec![self.mu_beta; self.indexes];
        let mut beta = simulate_beta(&factors, &mu_beta, rng)?;
        // Greville abscissae reproduce a linear trend exactly.
        let t = times.len() as f64;
        let knots = basis.knots();
        for (k, b) in beta.iter_mut().enumerate() {
            let l = k % n_splines;
            let greville = (knots[l + 1] + knots[l + 2] + knots[l + 3]) / 3.0;
            *b += self.trend * greville / 10.0 * (t - 1.0) / t;
        }
        let variant = self.model.variant();
        let lambda: Vec<f64> = (0..self.indexes)
            .map(|p| if variant.samples_skewness() { self.lambda_star * sigma_i[(p, p)].sqrt() } else { 0.0 })
            .collect();
        let a = if variant == Variant::Gaussian { f64::INFINITY } else { self.a };
        let state = ChainState {
            beta,
            mu_beta,
            lambda,
            z_abs: vec![0.0; times.len()],
            sigma2: vec![1.0; times.len()],
            a,
            sigma_i,
            sigma_b,
            matern,
        };
        Ok((state, basis))
    }

    pub fn simulate<R: Rng + ?Sized>(&self, n_splines: usize, rng: &mut R) -> Result<SimulatedScenario> {
        let (mut truth, basis) = self.truth(n_splines, rng)?;
        let sim = simulate_dataset_with_latents(&truth, &self.sites(), &self.times(), &basis, rng)?;
        truth.z_abs = sim.z_abs;
        truth.sigma2 = sim.sigma2;
        let delta = delta_from_beta(&truth.beta, &basis)?;
        Ok(SimulatedScenario { truth, data: sim.data, basis, delta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lattice_and_shapes() {
        let sc = Scenario { grid: [4, 2], indexes: 3, years: 30, ..Scenario::default() };
        let sites = sc.sites();
        assert_eq!(sites.len(), 8);
        assert_eq!(sites[5], [2.5, 2.5]);
        let sim = sc.simulate(5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!((sim.data.n_times(), sim.data.n_sites(), sim.data.n_indexes()), (30, 8, 3));
        assert_eq!(sim.truth.beta.len(), 8 * 3 * 5);
        assert!((sim.truth.lambda_star(1) - 2.0).abs() < 1e-12);
        sim.truth.validate(None).unwrap();
    }

    #[test]
    fn trend_is_recovered_by_delta() {
        // With vanishing spline noise the decadal change equals the injected trend.
        let sc = Scenario { trend: 0.7, spline_sd: 1e-9, ..Scenario::default() };
        let (truth, basis) = sc.truth(7, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for d in delta_from_beta(&truth.beta, &basis).unwrap() {
            assert!((d - 0.7).abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn gaussian_truth_has_no_mixture() {
        let sc = Scenario { model: ModelKind::Mgp, ..Scenario::default() };
        let sim = sc.simulate(7, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(sim.truth.a.is_infinite());
        assert!(sim.truth.lambda.iter().all(|&l| l == 0.0));
        assert!(sim.truth.sigma2.iter().all(|&s| s == 1.0));
    }
}
