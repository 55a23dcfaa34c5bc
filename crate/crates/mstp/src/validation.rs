//! Joint-distribution (Geweke) check of the sampler.
//!
//! The forward sampler draws `θ` from the prior and `Y | θ`; the successive
//! sampler alternates one Gibbs sweep `θ | Y` with a fresh `Y | θ`. Both have
//! the joint law as their stationary distribution, so every test statistic
//! must agree in mean.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mstp_core::covariance::Coord;
use mstp_core::diagnostics::effective_sample_size;
use mstp_core::model::{spline_basis, ChainState, Dims, ObservationTensor, SplineBasis};
use mstp_core::sampler::{PriorConfig, Problem, Sampler, Variant};
use mstp_core::simulate::{sample_prior, simulate_given_latents};
use mstp_core::Result;

#[derive(Debug, Clone)]
pub struct GewekeConfig {
    pub samples: usize,
    pub seed: u64,
    pub variant: Variant,
    pub sites: Vec<Coord>,
    pub indexes: usize,
    pub splines: usize,
    pub times: usize,
    pub priors: PriorConfig,
}

impl GewekeConfig {
    /// Three sites, two indexes, four splines and four times under proper
    /// priors tight enough for the chain to mix.
    pub fn small(samples: usize, seed: u64, variant: Variant) -> Self {
        let priors = PriorConfig {
            mu_beta_sd: 1.0,
            lambda_sd: 1.0,
            iw_df: 8.0,
            iw_scale: 4.0,
            a_grid: (3..=12).map(f64::from).collect(),
            rho_max: 3.0,
            log_nu_mean: -0.5,
            log_nu_sd: 0.5,
        };
        GewekeConfig {
            samples,
            seed,
            variant,
            sites: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            indexes: 2,
            splines: 4,
            times: 4,
            priors,
        }
    }

    fn dims(&self) -> Dims {
        Dims { sites: self.sites.len(), indexes: self.indexes, splines: self.splines, times: self.times }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeStat {
    pub name: String,
    pub forward_mean: f64,
    pub forward_se: f64,
    pub chain_mean: f64,
    pub chain_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GewekeReport {
    pub stats: Vec<GewekeStat>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    pub fn agreeing(&self, limit: f64) -> usize {
        self.stats.iter().filter(|s| s.z.abs() < limit).count()
    }
}

/// Statistics of one state, named by [`statistic_names`].
pub fn statistics(s: &ChainState, variant: Variant) -> Vec<f64> {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut out = vec![
        s.mu_beta[0],
        s.mu_beta[1],
        mean(&s.beta),
        s.beta.iter().map(|b| b * b).sum::<f64>() / s.beta.len() as f64,
        s.beta[0] * s.beta[1],
        s.sigma_i[(0, 0)].ln(),
        s.sigma_i[(0, 1)],
        s.sigma_b[(0, 0)].ln(),
        s.sigma_b[(0, 1)],
        s.matern.rho,
        s.matern.nu.ln(),
        s.matern.gamma,
    ];
    if variant.samples_scale_mixture() {
        out.extend([s.a, s.sigma2[0].ln(), mean(&s.sigma2.iter().map(|v| v.ln()).collect::<Vec<_>>())]);
    }
    if variant.samples_skewness() {
        out.extend([s.lambda[0], s.lambda[1] * s.lambda[1], s.z_abs[0], s.z_abs[1] * s.lambda[0]]);
    }
    out
}

pub fn statistic_names(variant: Variant) -> Vec<&'static str> {
    let mut names = vec![
        "mu_beta[1]",
        "mu_beta[2]",
        "mean(beta)",
        "mean(beta^2)",
        "beta[1]*beta[2]",
        "log sigma_i[1,1]",
        "sigma_i[1,2]",
        "log sigma_b[1,1]",
        "sigma_b[1,2]",
        "rho",
        "log nu",
        "gamma",
    ];
    if variant.samples_scale_mixture() {
        names.extend(["a", "log sigma2[1]", "mean(log sigma2)"]);
    }
    if variant.samples_skewness() {
        names.extend(["lambda[1]", "lambda[2]^2", "z[1]", "z[2]*lambda[1]"]);
    }
    names
}

fn fresh_data(
    state: &ChainState,
    sampler_factors: Option<&mstp_core::covariance::SeparableGaussian>,
    cfg: &GewekeConfig,
    basis: &SplineBasis,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    match sampler_factors {
        Some(f) => simulate_given_latents(state, f, basis, rng),
        None => {
            let f = mstp_core::covariance::SeparableGaussian::new(
                mstp_core::covariance::build_spatial_corr(&cfg.sites, &state.matern)?,
                state.sigma_i.clone(),
                None,
            )?;
            simulate_given_latents(state, &f, basis, rng)
        }
    }
}

fn mean_and_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0))
}

pub fn run_geweke(cfg: &GewekeConfig) -> Result<GewekeReport> {
    let dims = cfg.dims();
    let times: Vec<f64> = (0..cfg.times).map(|t| t as f64).collect();
    let basis = spline_basis(&times, cfg.splines)?;
    let names = statistic_names(cfg.variant);
    let k = names.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut forward: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.samples); k];
    for _ in 0..cfg.samples {
        let s = sample_prior(&cfg.priors, dims, &cfg.sites, cfg.variant, &mut rng)?;
        for (j, v) in statistics(&s, cfg.variant).into_iter().enumerate() {
            forward[j].push(v);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_CAFE);
    let start = sample_prior(&cfg.priors, dims, &cfg.sites, cfg.variant, &mut rng)?;
    let y = fresh_data(&start, None, cfg, &basis, &mut rng)?;
    let data = ObservationTensor::new(
        y,
        (0..dims.sites).map(|i| format!("s{i}")).collect(),
        cfg.sites.clone(),
        times.clone(),
        (0..dims.indexes).map(|p| format!("i{p}")).collect(),
    )?;
    let problem = Problem::new(data, basis.clone(), cfg.priors.clone(), cfg.variant)?;
    let mut sampler = Sampler::new(problem, start)?;
    let mut chain: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.samples); k];
    for _ in 0..cfg.samples {
        sampler.sweep(&mut rng)?;
        for (j, v) in statistics(sampler.state(), cfg.variant).into_iter().enumerate() {
            chain[j].push(v);
        }
        let y = fresh_data(sampler.state(), Some(sampler.factors()), cfg, &basis, &mut rng)?;
        sampler.set_data(&y)?;
    }

    let stats = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (fm, fv) = mean_and_var(&forward[j]);
            let (cm, cv) = mean_and_var(&chain[j]);
            let forward_se = (fv / cfg.samples as f64).sqrt();
            let chain_se = (cv / effective_sample_size(&chain[j])).sqrt();
            let z = (fm - cm) / (forward_se * forward_se + chain_se * chain_se).sqrt();
            GewekeStat { name: name.to_string(), forward_mean: fm, forward_se, chain_mean: cm, chain_se, z }
        })
        .collect();
    Ok(GewekeReport { stats })
}
