use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Extents of paired axes, shapes of chained tensors, or data lengths disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid axis permutation {0:?}")]
    Permutation(Vec<usize>),

    /// Factorization of a tensor whose entries are all zero.
    #[error("tensor is identically zero; rank is undefined")]
    ZeroTensor,

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("linear algebra backend failed: {0}")]
    Backend(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The power iteration oscillates between two vectors; the dominant
    /// eigenvalue is not unique in modulus.
    #[error("dominant eigenvalue appears degenerate (alternating Rayleigh quotients {first} and {second})")]
    Degenerate { first: String, second: String },

    #[error("ill-conditioned normalization: |denominator| = {0:.3e}")]
    IllConditioned(f64),

    #[error("folding requires a column with an even number of tensors, got {0}")]
    AsymmetricColumn(usize),

    /// Requested time exceeds what a finite chain can represent without
    /// boundary effects reaching the measured site.
    #[error("light-cone violation: {0}")]
    LightCone(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("all singular values fell below the cutoff")]
    Underflow,
}

pub type Result<T> = std::result::Result<T, Error>;
