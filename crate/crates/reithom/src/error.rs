//! Shared error type for the workspace.
//!
//! Every failure mode that can cross a module boundary gets its own variant,
//! so the CLI can map each one to a distinct exit code.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation (e.g. a
    /// negative argument to an N-function).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a documented precondition (shape mismatch,
    /// under-resolved grid, invalid solver setup).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid experiment configuration (unknown catalog name, bad schema,
    /// unparsable expression).
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite or otherwise unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// An epsilon value that does not align with the sampling grid.
    /// Oscillations would alias, so the operation refuses to run.
    #[error("incommensurate epsilon: {0}")]
    Incommensurate(String),

    /// A query outside a tabulated lattice hull that could not be satisfied
    /// by extension.
    #[error("range error: {0}")]
    Range(String),

    /// Gradient requested for an integrand that is not differentiable in xi
    /// and carries no smoothing parameter.
    #[error("nonsmooth integrand: {0}")]
    Nonsmooth(String),

    /// The conjugate sup is not attained within the search range: the density
    /// never reaches the requested slope.
    #[error("unbounded conjugate: {0}")]
    UnboundedConjugate(String),

    /// The generator fails an N-function axiom.
    #[error("invalid N-function: {0}")]
    InvalidNFunction(String),

    /// A solve hit its iteration cap in a context where convergence is
    /// mandatory (strict mode).
    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI as its exit status.
    pub fn code(&self) -> i32 {
        match self {
            Error::Domain(_) => 2,
            Error::Contract(_) => 3,
            Error::Config(_) => 4,
            Error::Data(_) => 5,
            Error::Incommensurate(_) => 6,
            Error::Range(_) => 7,
            Error::Nonsmooth(_) => 8,
            Error::UnboundedConjugate(_) => 9,
            Error::InvalidNFunction(_) => 10,
            Error::NonConvergence(_) => 11,
            Error::Io(_) => 12,
            Error::Serde(_) => 13,
        }
    }

    /// Short kind tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Incommensurate(_) => "incommensurate",
            Error::Range(_) => "range",
            Error::Nonsmooth(_) => "nonsmooth",
            Error::UnboundedConjugate(_) => "unbounded-conjugate",
            Error::InvalidNFunction(_) => "invalid-nfunction",
            Error::NonConvergence(_) => "non-convergence",
            Error::Io(_) => "io",
            Error::Serde(_) => "serde",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
