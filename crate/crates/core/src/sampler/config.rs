use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{domain, Error, Result};

/// Which blocks of the hierarchy are free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Skew-t: every block is sampled.
    SkewT,
    /// Symmetric t: `λ ≡ 0` and `|z| ≡ 0`.
    StudentT,
    /// Gaussian: additionally `σ² ≡ 1` and `a = ∞`.
    Gaussian,
}

impl Variant {
    pub fn samples_skewness(self) -> bool {
        self == Variant::SkewT
    }

    pub fn samples_scale_mixture(self) -> bool {
        self != Variant::Gaussian
    }
}

/// A model to fit: a variant, either joint over all indexes or one
/// independent univariate fit per index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Mstp,
    Mtp,
    Mgp,
    Stp,
    Tp,
    Gp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] =
        [ModelKind::Mstp, ModelKind::Mtp, ModelKind::Mgp, ModelKind::Stp, ModelKind::Tp, ModelKind::Gp];

    pub fn variant(self) -> Variant {
        match self {
            ModelKind::Mstp | ModelKind::Stp => Variant::SkewT,
            ModelKind::Mtp | ModelKind::Tp => Variant::StudentT,
            ModelKind::Mgp | ModelKind::Gp => Variant::Gaussian,
        }
    }

    pub fn is_univariate(self) -> bool {
        matches!(self, ModelKind::Stp | ModelKind::Tp | ModelKind::Gp)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mstp => "mstp",
            ModelKind::Mtp => "mtp",
            ModelKind::Mgp => "mgp",
            ModelKind::Stp => "stp",
            ModelKind::Tp => "tp",
            ModelKind::Gp => "gp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| domain(format!("unknown model `{s}`; expected one of mstp, mtp, mgp, stp, tp, gp")))
    }
}

/// `{0.1, 0.2, ..., max}` on a 0.1 spacing.
pub fn default_a_grid(max: f64) -> Vec<f64> {
    let top = (max * 10.0 + 0.5) as usize;
    (1..=top).map(|k| k as f64 / 10.0).collect()
}

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub mu_beta_sd: f64,
    pub lambda_sd: f64,
    /// Degrees of freedom of the inverse-Wishart priors on `Σ_I` and `Σ_B`.
    pub iw_df: f64,
    /// The inverse-Wishart scale matrices are `iw_scale · I`.
    pub iw_scale: f64,
    /// Support of the discrete uniform prior on `a`.
    pub a_grid: Vec<f64>,
    /// Upper end of the uniform prior on the Matérn range.
    pub rho_max: f64,
    pub log_nu_mean: f64,
    pub log_nu_sd: f64,
}

impl PriorConfig {
    pub fn new(rho_max: f64) -> Self {
        PriorConfig {
            mu_beta_sd: 100.0,
            lambda_sd: 10.0,
            iw_df: 0.01,
            iw_scale: 0.01,
            a_grid: default_a_grid(20.0),
            rho_max,
            log_nu_mean: -1.2,
            log_nu_sd: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu_beta_sd", self.mu_beta_sd),
            ("lambda_sd", self.lambda_sd),
            ("iw_df", self.iw_df),
            ("iw_scale", self.iw_scale),
            ("rho_max", self.rho_max),
            ("log_nu_sd", self.log_nu_sd),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("prior `{name}` must be positive, got {v}")));
            }
        }
        if !self.log_nu_mean.is_finite() {
            return Err(domain("prior `log_nu_mean` must be finite"));
        }
        if self.a_grid.is_empty() || self.a_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(domain("the degrees-of-freedom grid must be nonempty and positive"));
        }
        if self.a_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("the degrees-of-freedom grid must be strictly increasing"));
        }
        Ok(())
    }

    /// Grid point nearest to `a`.
    pub fn nearest_grid_a(&self, a: f64) -> f64 {
        self.a_grid
            .iter()
            .copied()
            .fold(self.a_grid[0], |best, g| if (g - a).abs() < (best - a).abs() { g } else { best })
    }
}

/// Chain schedule and adaptation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Iterations per step-size adaptation during burn-in.
    pub adapt_window: usize,
    /// Acceptance band the adaptation steers toward.
    pub target_accept: (f64, f64),
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { n_iter: 20_000, burn_in: 10_000, thin: 5, seed: 0, adapt_window: 200, target_accept: (0.3, 0.5) }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(domain(format!("burn-in {} must be below the iteration count {}", self.burn_in, self.n_iter)));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(domain("thin and adapt_window must be at least 1"));
        }
        let (lo, hi) = self.target_accept;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(domain("target acceptance band must satisfy 0 < lo < hi < 1"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ChainConfig::default();
        assert_eq!(c.retained(), 2000);
        let p = PriorConfig::new(55.90);
        p.validate().unwrap();
        assert_eq!(p.a_grid.len(), 200);
        assert_eq!((p.a_grid[0], p.a_grid[199]), (0.1, 20.0));
        assert!(p.a_grid.contains(&10.0));
        assert_eq!(p.nearest_grid_a(5.04), 5.0);
    }

    #[test]
    fn parse_kinds() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("MSTP".parse::<ModelKind>().is_ok());
        assert!("foo".parse::<ModelKind>().is_err());
        assert!(ModelKind::Tp.is_univariate() && ModelKind::Tp.variant() == Variant::StudentT);
    }

    #[test]
    fn invalid_schedules() {
        let c = ChainConfig { burn_in: 20_000, ..ChainConfig::default() };
        assert!(c.validate().is_err());
        let c = ChainConfig { thin: 0, ..ChainConfig::default() };
        assert!(c.validate().is_err());
    }
}
