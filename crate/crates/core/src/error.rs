use alloc::string::String;

/// Errors raised by the model, sampler and estimators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{factor} is not positive definite after jitter up to {max_jitter:e}")]
    Factorization { factor: String, max_jitter: f64 },
    #[error("cannot build spline basis: {0}")]
    IllPosedBasis(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("block `{block}` failed at iteration {iteration}: {source}")]
    Block { block: &'static str, iteration: usize, source: alloc::boxed::Box<Error> },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
