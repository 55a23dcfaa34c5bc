//! Data and parameter types, the spline mean surface, skew-t densities and
//! model moments.

mod data;
mod moments;
mod skewt;
mod spline;
mod state;

pub use data::ObservationTensor;
pub use moments::{abs_z_mean, model_moments, sigma2_mean, ModelMoments};
pub use skewt::{skewt_logpdf_multi, skewt_logpdf_uni, JointSkewT, SiteSkewT, SkewTParams};
pub use spline::{eval_basis, spline_basis, SplineBasis};
pub use state::{mean_surface, ChainState, Dims};
