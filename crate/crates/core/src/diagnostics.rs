//! Trend summaries, information criteria and chain diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{shape, Result};
use crate::model::SplineBasis;
use crate::sampler::{LikelihoodLog, ModelFit, PosteriorSamples};

/// Default `|t|` above which a trend is flagged.
pub const T_THRESHOLD: f64 = 2.0;

/// `Δ_p(s_i) = [μ_T,p(s_i) - μ_1,p(s_i)] / ((T - 1)/10)` for one coefficient
/// vector, laid out site-slowest with the index fastest.
pub fn delta_from_beta(beta: &[f64], basis: &SplineBasis) -> Result<Vec<f64>> {
    let t = basis.n_times();
    if t < 2 {
        return Err(shape("a decadal change needs at least two time points"));
    }
    let l = basis.n_basis();
    if beta.len() % l != 0 {
        return Err(shape("coefficient vector does not match the basis"));
    }
    let (first, last) = (basis.row(0), basis.row(t - 1));
    let decades = (t - 1) as f64 / 10.0;
    Ok(beta
        .chunks_exact(l)
        .map(|c| {
            let end: f64 = c.iter().zip(last).map(|(b, x)| b * x).sum();
            let start: f64 = c.iter().zip(first).map(|(b, x)| b * x).sum();
            (end - start) / decades
        })
        .collect())
}

/// Per-draw `n × P` decadal changes of a fit.
pub fn delta_decadal(fit: &ModelFit, basis: &SplineBasis) -> Result<Vec<Vec<f64>>> {
    (0..fit.n_draws()).map(|k| delta_from_beta(&fit.beta(k), basis)).collect()
}

/// Per-draw decadal changes of a single chain.
pub fn delta_decadal_samples(samples: &PosteriorSamples, basis: &SplineBasis) -> Result<Vec<Vec<f64>>> {
    samples.draws.iter().map(|s| delta_from_beta(&s.beta, basis)).collect()
}

/// Posterior summary of `Δ` at every (site, index), site-slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendSummary {
    pub n_sites: usize,
    pub n_indexes: usize,
    pub delta_mean: Vec<f64>,
    pub delta_sd: Vec<f64>,
    /// `mean / sd`; NaN where the draws are all equal.
    pub t_value: Vec<f64>,
    pub significant: Vec<bool>,
    pub degenerate: Vec<bool>,
}

impl TrendSummary {
    pub fn at(&self, site: usize, index: usize) -> usize {
        site * self.n_indexes + index
    }

    /// Mean posterior SD of `Δ` over all sites and indexes.
    pub fn mean_sd(&self) -> f64 {
        self.delta_sd.iter().sum::<f64>() / self.delta_sd.len() as f64
    }
}

pub fn trend_summary(draws: &[Vec<f64>], n_indexes: usize, threshold: f64) -> Result<TrendSummary> {
    if draws.len() < 2 {
        return Err(shape("a trend summary needs at least two draws"));
    }
    let m = draws[0].len();
    if n_indexes == 0 || m % n_indexes != 0 || draws.iter().any(|d| d.len() != m) {
        return Err(shape("draws disagree in size"));
    }
    let n = draws.len() as f64;
    let mut mean = vec![0.0; m];
    for d in draws {
        mean.iter_mut().zip(d).for_each(|(a, b)| *a += b / n);
    }
    let mut var = vec![0.0; m];
    for d in draws {
        var.iter_mut().zip(d.iter().zip(&mean)).for_each(|(v, (x, mu))| *v += (x - mu) * (x - mu) / (n - 1.0));
    }
    let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    let degenerate: Vec<bool> = sd.iter().map(|&s| !(s > 0.0)).collect();
    let t_value: Vec<f64> =
        mean.iter().zip(&sd).zip(&degenerate).map(|((m, s), &dg)| if dg { f64::NAN } else { m / s }).collect();
    let significant = t_value.iter().map(|t| t.abs() > threshold).collect();
    Ok(TrendSummary {
        n_sites: m / n_indexes,
        n_indexes,
        delta_mean: mean,
        delta_sd: sd,
        t_value,
        significant,
        degenerate,
    })
}

/// What counts as one spatio-temporal point when normalizing criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointPartition {
    /// `n · T` site-time points, each a `P`-variate density.
    #[default]
    SiteTime,
    /// `n · T · P` scalar observations.
    SiteTimeIndex,
}

impl PointPartition {
    pub fn count(self, log: &LikelihoodLog) -> usize {
        match self {
            PointPartition::SiteTime => log.n_points,
            PointPartition::SiteTimeIndex => log.n_values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dic {
    pub total: f64,
    pub per_point: f64,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    /// Effective number of parameters `mean D - D(θ̄)`.
    pub p_d: f64,
}

/// `DIC = 2 mean[D(θ)] - D(θ̄)`.
pub fn dic(log: &LikelihoodLog, points: PointPartition) -> Result<Dic> {
    if log.deviance.is_empty() {
        return Err(shape("no deviance draws recorded"));
    }
    let mean = log.deviance.iter().sum::<f64>() / log.deviance.len() as f64;
    let total = 2.0 * mean - log.deviance_at_mean;
    Ok(Dic {
        total,
        per_point: total / points.count(log) as f64,
        mean_deviance: mean,
        deviance_at_mean: log.deviance_at_mean,
        p_d: mean - log.deviance_at_mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waic {
    pub total: f64,
    pub per_point: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// `WAIC = -2 Σ_points [log mean_draws exp(ll) - var_draws(ll)]`, with the
/// log-mean-exp stabilized by the per-point maximum.
pub fn waic(log: &LikelihoodLog, points: PointPartition) -> Result<Waic> {
    let s = log.n_draws();
    if s == 0 || log.pointwise.len() != s * log.n_points {
        return Err(shape("pointwise log-likelihood matrix is empty or ragged"));
    }
    let (mut lppd, mut penalty) = (0.0, 0.0);
    for j in 0..log.n_points {
        let col = (0..s).map(|k| log.pointwise[k * log.n_points + j]);
        let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = col.clone().map(|v| (v - max).exp()).sum();
        lppd += max + (sum_exp / s as f64).ln();
        if s > 1 {
            let mean = col.clone().sum::<f64>() / s as f64;
            penalty += col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1) as f64;
        }
    }
    let total = -2.0 * (lppd - penalty);
    Ok(Waic { total, per_point: total / points.count(log) as f64, lppd, p_waic: penalty })
}

/// Effective sample size from Geyer's initial positive sequence.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return 1.0;
    }
    let acf =
        |k: usize| x[..n - k].iter().zip(&x[k..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / (n as f64 * c0);
    let mut sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = acf(2 * m) + acf(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        m += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTrace {
    pub name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub parameters: Vec<ParameterTrace>,
    /// Post-burn-in acceptance rate of the joint `(ρ, ν)` update.
    pub accept_rho_nu: f64,
    pub accept_gamma: f64,
    pub draws: usize,
}

/// Scalar traces of one chain: `μ_β`, `λ`, `Σ_I` diagonal, `a`, `ρ`, `ν`,
/// `γ` and the deviance. `suffix` tags names, e.g. with an index label.
pub fn scalar_traces(samples: &PosteriorSamples, labels: &[String]) -> Vec<(String, Vec<f64>)> {
    let d = &samples.draws;
    let p = d.first().map_or(0, |s| s.mu_beta.len());
    let label = |k: usize| labels.get(k).cloned().unwrap_or_else(|| format!("{}", k + 1));
    let mut out = Vec::new();
    for k in 0..p {
        out.push((format!("mu_beta[{}]", label(k)), d.iter().map(|s| s.mu_beta[k]).collect()));
    }
    for k in 0..p {
        out.push((format!("lambda[{}]", label(k)), d.iter().map(|s| s.lambda[k]).collect()));
    }
    for k in 0..p {
        out.push((format!("sigma_i[{}]", label(k)), d.iter().map(|s| s.sigma_i[(k, k)]).collect()));
    }
    out.push(("a".into(), d.iter().map(|s| s.a).collect()));
    out.push(("rho".into(), d.iter().map(|s| s.matern.rho).collect()));
    out.push(("nu".into(), d.iter().map(|s| s.matern.nu).collect()));
    out.push(("gamma".into(), d.iter().map(|s| s.matern.gamma).collect()));
    out.push(("deviance".into(), samples.likelihood.deviance.clone()));
    out
}

pub fn chain_diagnostics(samples: &PosteriorSamples, labels: &[String]) -> Result<ChainDiagnostics> {
    if samples.draws.len() < 10 {
        return Err(shape(format!("diagnostics need at least 10 draws, got {}", samples.draws.len())));
    }
    let parameters = scalar_traces(samples, labels)
        .into_iter()
        .map(|(name, values)| {
            let n = values.len() as f64;
            let finite = values.iter().all(|v| v.is_finite());
            let mean = values.iter().sum::<f64>() / n;
            let sd = if finite {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let ess = if finite { effective_sample_size(&values) } else { f64::NAN };
            ParameterTrace { name, values, mean, sd, ess }
        })
        .collect();
    let (accept_rho_nu, accept_gamma) = samples.acceptance.rates_from(samples.burn_in);
    Ok(ChainDiagnostics { parameters, accept_rho_nu, accept_gamma, draws: samples.draws.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::spline_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn years(t: usize) -> Vec<f64> {
        (0..t).map(|k| 1951.0 + k as f64).collect()
    }

    #[test]
    fn delta_cases() {
        let basis = spline_basis(&years(67), 7).unwrap();
        let constant = vec![1.7; 7 * 2];
        assert!(delta_from_beta(&constant, &basis).unwrap().iter().all(|v| v.abs() < 1e-12));
        // Clamped cubic splines reproduce linear functions through their Greville abscissae.
        let knots = basis.knots();
        let greville: Vec<f64> = (0..7).map(|l| (knots[l + 1] + knots[l + 2] + knots[l + 3]) / 3.0).collect();
        // position x maps to year 1951 + x·66/67, so slope 1 per year is 66/67 per unit of x
        let linear: Vec<f64> = greville.iter().map(|g| g * 66.0 / 67.0).collect();
        let d = delta_from_beta(&linear, &basis).unwrap();
        assert!((d[0] - 10.0).abs() < 1e-10, "{}", d[0]);
        // Shift invariance
        let shifted: Vec<f64> = linear.iter().map(|v| v + 3.0).collect();
        assert!((delta_from_beta(&shifted, &basis).unwrap()[0] - d[0]).abs() < 1e-12);
    }

    #[test]
    fn summary_cases() {
        let same = vec![vec![0.5, 1.0]; 5];
        let s = trend_summary(&same, 2, T_THRESHOLD).unwrap();
        assert!(s.degenerate.iter().all(|&d| d) && s.significant.iter().all(|&f| !f));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<Vec<f64>> = (0..10_000).map(|_| vec![3.0 + rng.sample::<f64, _>(StandardNormal)]).collect();
        let s = trend_summary(&draws, 1, T_THRESHOLD).unwrap();
        assert!((s.t_value[0] - 3.0).abs() < 0.1 && s.significant[0]);
        assert!(trend_summary(&draws[..1], 1, 2.0).is_err());
    }

    fn log(pointwise: Vec<f64>, draws: usize, dev: Vec<f64>, at_mean: f64) -> LikelihoodLog {
        let n_points = pointwise.len() / draws;
        LikelihoodLog { deviance: dev, deviance_at_mean: at_mean, pointwise, n_points, n_values: n_points * 2 }
    }

    #[test]
    fn information_criteria() {
        let l = log(vec![-1.0, -2.0, -3.0], 1, vec![12.0], 12.0);
        let w = waic(&l, PointPartition::SiteTime).unwrap();
        assert!((w.total - 12.0).abs() < 1e-12 && (w.per_point - 4.0).abs() < 1e-12);
        let d = dic(&l, PointPartition::SiteTime).unwrap();
        assert_eq!((d.total, d.p_d), (12.0, 0.0));
        assert_eq!(dic(&l, PointPartition::SiteTimeIndex).unwrap().per_point, 2.0);

        // invariance under reordering draws and points
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pw: Vec<f64> = (0..40).map(|_| rng.random_range(-900.0..-800.0)).collect();
        let a = waic(&log(pw.clone(), 8, vec![0.0; 8], 0.0), PointPartition::SiteTime).unwrap();
        let mut perm = Vec::new();
        for k in (0..8).rev() {
            let row = &pw[k * 5..(k + 1) * 5];
            perm.extend(row.iter().rev());
        }
        let b = waic(&log(perm, 8, vec![0.0; 8], 0.0), PointPartition::SiteTime).unwrap();
        assert!((a.total - b.total).abs() < 1e-9 * a.total.abs());
        assert!(a.total.is_finite());
    }

    #[test]
    fn ess_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let white: Vec<f64> = (0..4000).map(|_| rng.sample(StandardNormal)).collect();
        let e = effective_sample_size(&white);
        assert!((e / 4000.0 - 1.0).abs() < 0.1, "{e}");
        assert_eq!(effective_sample_size(&[2.0; 100]), 1.0);
        let mut walk = vec![0.0f64; 4000];
        for k in 1..4000 {
            walk[k] = walk[k - 1] + rng.sample::<f64, _>(StandardNormal);
        }
        assert!(effective_sample_size(&walk) < 40.0);
    }
}
