use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covariance::{MaternParams, SeparableGaussian, SpdFactor};
use crate::error::{shape, Error, Result};
use crate::model::{ChainState, ObservationTensor, SplineBasis};
use crate::sampler::config::{ChainConfig, ModelKind, PriorConfig, Variant};
use crate::sampler::gibbs::{
    gibbs_a, gibbs_beta, gibbs_lambda, gibbs_mu_beta, gibbs_sigma2, gibbs_sigma_b, gibbs_sigma_i, gibbs_z,
};
use crate::sampler::mh::{adapt_steps, mh_gamma, mh_rho_nu, AcceptanceLog, StepSizes};
use crate::sampler::problem::Problem;

/// Reproducible generator for stream `stream` of a root seed.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Starting state: per-series ridge fits for `β`, their mean for `μ_β`, the
/// residual covariance for `Σ_I`, a residual-skewness start for `λ`, and
/// fixed values elsewhere.
pub fn initial_state(problem: &Problem) -> Result<ChainState> {
    let d = problem.dims();
    let basis = &problem.basis;
    let mut xtx = DMatrix::<f64>::zeros(d.splines, d.splines);
    for t in 0..d.times {
        let x = basis.row(t);
        for a in 0..d.splines {
            for b in 0..d.splines {
                xtx[(a, b)] += x[a] * x[b];
            }
        }
    }
    let ridge = 1e-6 * xtx.trace() / d.splines as f64;
    for a in 0..d.splines {
        xtx[(a, a)] += ridge;
    }
    let gram = SpdFactor::new("ridge Gram matrix", xtx)?;
    let mut beta = vec![0.0; d.sites * d.indexes * d.splines];
    for i in 0..d.sites {
        for p in 0..d.indexes {
            let mut xty = vec![0.0; d.splines];
            for t in 0..d.times {
                let y = problem.data.get(t, i, p);
                for (l, x) in basis.row(t).iter().enumerate() {
                    xty[l] += x * y;
                }
            }
            gram.solve(&mut xty);
            beta[d.beta_at(i, p, 0)..d.beta_at(i, p, 0) + d.splines].copy_from_slice(&xty);
        }
    }
    let mut mu_beta = vec![0.0; d.indexes];
    for (k, b) in beta.iter().enumerate() {
        mu_beta[(k / d.splines) % d.indexes] += b / (d.sites * d.splines) as f64;
    }
    let skew = problem.variant.samples_skewness();
    let gaussian = problem.variant == Variant::Gaussian;
    let mut state = ChainState {
        beta,
        mu_beta,
        lambda: vec![0.0; d.indexes],
        z_abs: vec![if skew { (2.0 / core::f64::consts::PI).sqrt() } else { 0.0 }; d.times],
        sigma2: vec![1.0; d.times],
        a: if gaussian { f64::INFINITY } else { problem.priors.nearest_grid_a(10.0) },
        sigma_i: DMatrix::identity(d.indexes, d.indexes),
        sigma_b: DMatrix::identity(d.splines, d.splines),
        matern: MaternParams::new(problem.priors.rho_max / 10.0, 0.5, 0.5)?,
    };
    let mut cov = DMatrix::<f64>::zeros(d.indexes, d.indexes);
    let mut mean = vec![0.0; d.indexes];
    let count = (d.times * d.sites) as f64;
    let residuals: Vec<Vec<f64>> = (0..d.times).map(|t| problem.residual(&state, t, false)).collect();
    for e in &residuals {
        for row in e.chunks_exact(d.indexes) {
            for p in 0..d.indexes {
                mean[p] += row[p] / count;
            }
        }
    }
    for e in &residuals {
        for row in e.chunks_exact(d.indexes) {
            for p in 0..d.indexes {
                for q in 0..d.indexes {
                    cov[(p, q)] += (row[p] - mean[p]) * (row[q] - mean[q]) / (count - 1.0).max(1.0);
                }
            }
        }
    }
    if skew {
        state.lambda = skewness_start(&residuals, d.sites, d.indexes);
    }
    if SpdFactor::new("residual covariance", cov.clone()).is_ok() {
        state.sigma_i = cov;
    } else {
        let floor = cov.diagonal().iter().copied().fold(0.0, f64::max).max(1.0) * 1e-6;
        state.sigma_i = DMatrix::from_diagonal(&cov.diagonal().map(|v| v.max(floor)));
    }
    Ok(state)
}

/// Skewness start: the residuals averaged over sites carry `(|z_t| - E|z|) λ`,
/// so the sign of their skewness is the sign of `λ_p`. The magnitude is their
/// standard deviation. A zero start can settle in the mirrored mode.
fn skewness_start(residuals: &[Vec<f64>], sites: usize, indexes: usize) -> Vec<f64> {
    let t = residuals.len() as f64;
    (0..indexes)
        .map(|p| {
            let series: Vec<f64> =
                residuals.iter().map(|e| (0..sites).map(|i| e[i * indexes + p]).sum::<f64>() / sites as f64).collect();
            let mean = series.iter().sum::<f64>() / t;
            let m2 = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t;
            let m3 = series.iter().map(|v| (v - mean) * (v - mean) * (v - mean)).sum::<f64>() / t;
            if m2 > 0.0 && m3 != 0.0 {
                m2.sqrt().copysign(m3)
            } else {
                0.0
            }
        })
        .collect()
}

/// A running chain: the problem, its current state and cached factors.
#[derive(Debug, Clone)]
pub struct Sampler {
    problem: Problem,
    state: ChainState,
    factors: SeparableGaussian,
    steps: StepSizes,
    acceptance: AcceptanceLog,
    iteration: usize,
}

fn at(block: &'static str, iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Block { block, iteration, source: alloc::boxed::Box::new(e) }
}

impl Sampler {
    pub fn new(problem: Problem, state: ChainState) -> Result<Self> {
        problem.check_state(&state)?;
        state.validate(None)?;
        let factors = problem.factors(&state)?;
        Ok(Sampler {
            problem,
            state,
            factors,
            steps: StepSizes::default(),
            acceptance: AcceptanceLog::default(),
            iteration: 0,
        })
    }

    pub fn initialize(problem: Problem) -> Result<Self> {
        let state = initial_state(&problem)?;
        Sampler::new(problem, state)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn factors(&self) -> &SeparableGaussian {
        &self.factors
    }

    pub fn steps(&self) -> StepSizes {
        self.steps
    }

    pub fn set_steps(&mut self, steps: StepSizes) {
        self.steps = steps;
    }

    pub fn acceptance(&self) -> &AcceptanceLog {
        &self.acceptance
    }

    /// Replaces the observations, keeping the state.
    pub fn set_data(&mut self, y: &[f64]) -> Result<()> {
        if y.len() != self.problem.data.values().len() {
            return Err(shape("replacement data has the wrong length"));
        }
        self.problem.data.values_mut().copy_from_slice(y);
        Ok(())
    }

    /// One full sweep in the order β, μ_β, λ, z, σ², a, Σ_I, Σ_B, (ρ, ν), γ,
    /// skipping the blocks the variant fixes.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let it = self.iteration;
        let (p, s, f) = (&self.problem, &mut self.state, &mut self.factors);
        let variant = p.variant;
        gibbs_beta(s, f, p, rng).map_err(at("beta", it))?;
        gibbs_mu_beta(s, f, p, rng).map_err(at("mu_beta", it))?;
        if variant.samples_skewness() {
            gibbs_lambda(s, f, p, rng).map_err(at("lambda", it))?;
            gibbs_z(s, f, p, rng).map_err(at("z", it))?;
        }
        if variant.samples_scale_mixture() {
            gibbs_sigma2(s, f, p, rng).map_err(at("sigma2", it))?;
            gibbs_a(s, p, rng).map_err(at("a", it))?;
        }
        gibbs_sigma_i(s, f, p, rng).map_err(at("sigma_i", it))?;
        gibbs_sigma_b(s, f, p, rng).map_err(at("sigma_b", it))?;
        let a1 = mh_rho_nu(s, f, p, &self.steps, rng).map_err(at("rho_nu", it))?;
        let a2 = mh_gamma(s, f, p, self.steps.gamma, rng).map_err(at("gamma", it))?;
        self.acceptance.rho_nu.push(a1);
        self.acceptance.gamma.push(a2);
        self.iteration += 1;
        Ok(())
    }

    /// Adapts step sizes from the last `window` iterations.
    pub fn adapt(&mut self, window: usize, band: (f64, f64)) {
        let n = self.acceptance.rho_nu.len();
        let from = n.saturating_sub(window);
        self.steps = adapt_steps(&self.acceptance.rho_nu[from..], &self.acceptance.gamma[from..], self.steps, band);
    }

    /// Marginal log-likelihood of the current state.
    pub fn log_likelihood(&self) -> Result<(f64, Vec<f64>)> {
        self.problem.log_likelihood(&self.state, &self.factors)
    }
}

/// Likelihood evaluations of the retained draws.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodLog {
    /// `-2 log p(Y | θ)` per draw.
    pub deviance: Vec<f64>,
    /// Deviance at the posterior-mean parameters.
    pub deviance_at_mean: f64,
    /// Row-major `draws × points` log-densities, points ordered time-slowest.
    pub pointwise: Vec<f64>,
    pub n_points: usize,
    /// Number of scalar observations, `n · T · P`.
    pub n_values: usize,
}

impl LikelihoodLog {
    pub fn n_draws(&self) -> usize {
        self.deviance.len()
    }

    pub fn draw(&self, k: usize) -> &[f64] {
        &self.pointwise[k * self.n_points..(k + 1) * self.n_points]
    }

    /// Joint log of independent components observed on the same points; the
    /// densities multiply, so deviances and pointwise terms add.
    pub fn combine(parts: &[LikelihoodLog]) -> Result<LikelihoodLog> {
        let first = parts.first().ok_or_else(|| shape("no likelihood logs to combine"))?;
        let mut out = first.clone();
        for p in &parts[1..] {
            if p.n_draws() != out.n_draws() || p.n_points != out.n_points {
                return Err(shape("likelihood logs disagree in draws or points"));
            }
            out.deviance.iter_mut().zip(&p.deviance).for_each(|(a, b)| *a += b);
            out.pointwise.iter_mut().zip(&p.pointwise).for_each(|(a, b)| *a += b);
            out.deviance_at_mean += p.deviance_at_mean;
            out.n_values += p.n_values;
        }
        Ok(out)
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub draws: Vec<ChainState>,
    pub likelihood: LikelihoodLog,
    pub acceptance: AcceptanceLog,
    pub burn_in: usize,
    pub final_steps: StepSizes,
    pub variant: Variant,
}

/// Posterior-mean state; the discrete `a` takes its posterior mode.
pub fn posterior_mean_state(draws: &[ChainState]) -> Result<ChainState> {
    let first = draws.first().ok_or_else(|| shape("no draws"))?;
    let n = draws.len() as f64;
    let avg = |get: &dyn Fn(&ChainState) -> &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; get(first).len()];
        for s in draws {
            out.iter_mut().zip(get(s)).for_each(|(o, v)| *o += v / n);
        }
        out
    };
    let mut modes: Vec<(f64, usize)> = Vec::new();
    for s in draws {
        match modes.iter_mut().find(|(a, _)| *a == s.a) {
            Some(m) => m.1 += 1,
            None => modes.push((s.a, 1)),
        }
    }
    let a = modes.iter().fold((first.a, 0usize), |best, &(a, c)| if c > best.1 { (a, c) } else { best }).0;
    let mut sigma_i = DMatrix::zeros(first.sigma_i.nrows(), first.sigma_i.ncols());
    let mut sigma_b = DMatrix::zeros(first.sigma_b.nrows(), first.sigma_b.ncols());
    let (mut rho, mut nu, mut gamma) = (0.0, 0.0, 0.0);
    for s in draws {
        sigma_i += &s.sigma_i / n;
        sigma_b += &s.sigma_b / n;
        rho += s.matern.rho / n;
        nu += s.matern.nu / n;
        gamma += s.matern.gamma / n;
    }
    Ok(ChainState {
        beta: avg(&|s| &s.beta),
        mu_beta: avg(&|s| &s.mu_beta),
        lambda: avg(&|s| &s.lambda),
        z_abs: avg(&|s| &s.z_abs),
        sigma2: avg(&|s| &s.sigma2),
        a,
        sigma_i,
        sigma_b,
        matern: MaternParams { rho, nu, gamma: gamma.clamp(0.0, 1.0) },
    })
}

/// Runs a chain from the default initialization.
pub fn run_chain<R: Rng + ?Sized>(
    data: &ObservationTensor,
    basis: &SplineBasis,
    priors: &PriorConfig,
    config: &ChainConfig,
    variant: Variant,
    rng: &mut R,
) -> Result<PosteriorSamples> {
    let problem = Problem::new(data.clone(), basis.clone(), priors.clone(), variant)?;
    run_sampler(Sampler::initialize(problem)?, config, rng)
}

/// Runs an already-initialized sampler through the schedule of `config`.
pub fn run_sampler<R: Rng + ?Sized>(
    mut sampler: Sampler,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let mut draws = Vec::with_capacity(config.retained());
    let mut deviance = Vec::with_capacity(config.retained());
    let mut pointwise = Vec::new();
    for it in 0..config.n_iter {
        sampler.sweep(rng)?;
        if it < config.burn_in {
            if (it + 1) % config.adapt_window == 0 {
                sampler.adapt(config.adapt_window, config.target_accept);
            }
            continue;
        }
        if (it + 1 - config.burn_in) % config.thin == 0 {
            let (dev, pw) = sampler.log_likelihood().map_err(at("likelihood", it))?;
            deviance.push(dev);
            pointwise.extend(pw);
            draws.push(sampler.state.clone());
        }
    }
    let mean = posterior_mean_state(&draws)?;
    let deviance_at_mean = sampler.problem.deviance(&mean)?;
    let d = sampler.problem.dims();
    Ok(PosteriorSamples {
        draws,
        likelihood: LikelihoodLog {
            deviance,
            deviance_at_mean,
            pointwise,
            n_points: d.times * d.sites,
            n_values: d.times * d.sites * d.indexes,
        },
        acceptance: sampler.acceptance.clone(),
        burn_in: config.burn_in,
        final_steps: sampler.steps,
        variant: sampler.problem.variant,
    })
}

/// A fitted model: one joint chain, or one chain per index for the
/// univariate kinds (in index order).
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub kind: ModelKind,
    pub components: Vec<PosteriorSamples>,
}

impl ModelFit {
    pub fn likelihood(&self) -> Result<LikelihoodLog> {
        if self.components.len() == 1 {
            return Ok(self.components[0].likelihood.clone());
        }
        let parts: Vec<LikelihoodLog> = self.components.iter().map(|c| c.likelihood.clone()).collect();
        LikelihoodLog::combine(&parts)
    }

    pub fn n_draws(&self) -> usize {
        self.components.first().map_or(0, |c| c.draws.len())
    }

    /// `β` of draw `k` laid out for all indexes, whatever the fit structure.
    pub fn beta(&self, k: usize) -> Vec<f64> {
        if self.components.len() == 1 {
            return self.components[0].draws[k].beta.clone();
        }
        let parts: Vec<&[f64]> = self.components.iter().map(|c| c.draws[k].beta.as_slice()).collect();
        let l = self.components[0].draws[k].sigma_b.nrows();
        let sites = parts[0].len() / l;
        let mut out = Vec::with_capacity(sites * parts.len() * l);
        for i in 0..sites {
            for part in &parts {
                out.extend_from_slice(&part[i * l..(i + 1) * l]);
            }
        }
        out
    }
}

/// Fits a model kind. Joint kinds use stream 0 of `config.seed`; univariate
/// kinds fit index `p` on stream `p + 1`.
pub fn fit_model(
    data: &ObservationTensor,
    basis: &SplineBasis,
    priors: &PriorConfig,
    config: &ChainConfig,
    kind: ModelKind,
) -> Result<ModelFit> {
    let components = if kind.is_univariate() {
        (0..data.n_indexes())
            .map(|p| {
                let sub = data.select_index(p)?;
                run_chain(&sub, basis, priors, config, kind.variant(), &mut chain_rng(config.seed, p as u64 + 1))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![run_chain(data, basis, priors, config, kind.variant(), &mut chain_rng(config.seed, 0))?]
    };
    if components.iter().any(|c| c.draws.is_empty()) {
        return Err(Error::Numerical(format!("{kind} chain retained no draws")));
    }
    Ok(ModelFit { kind, components })
}
