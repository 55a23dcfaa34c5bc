//! MCMC for the hierarchy: conjugate Gibbs blocks, Metropolis-Hastings for
//! the Matérn parameters, and chain orchestration.

mod chain;
mod config;
mod gibbs;
mod mh;
mod problem;

pub use chain::{
    chain_rng, fit_model, initial_state, posterior_mean_state, run_chain, run_sampler, LikelihoodLog, ModelFit,
    PosteriorSamples, Sampler,
};
pub use config::{default_a_grid, ChainConfig, ModelKind, PriorConfig, Variant};
pub use gibbs::{
    a_log_masses, beta_conditional, beta_draw_with, gibbs_a, gibbs_beta, gibbs_lambda, gibbs_mu_beta, gibbs_sigma2,
    gibbs_sigma_b, gibbs_sigma_i, gibbs_z, lambda_conditional, mu_beta_conditional, sample_a, sigma2_conditional,
    sigma_b_conditional, sigma_i_conditional, z_conditional, GaussianConditional,
};
pub use mh::{
    adapt_step, adapt_steps, mh_gamma, mh_gamma_step, mh_rho_nu, mh_rho_nu_step, AcceptanceLog, MhOutcome,
    SpatialTarget, StepSizes,
};
pub use problem::Problem;
