//! Multivariate spatial skew-t process: Kronecker-structured covariance
//! algebra, skew-t densities, a Gibbs/Metropolis sampler for the full
//! hierarchy, forward simulation, extremal dependence and model comparison.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
extern crate alloc;

pub mod covariance;
pub mod diagnostics;
pub mod error;
pub mod extremal;
pub mod model;
pub mod random;
pub mod sampler;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
