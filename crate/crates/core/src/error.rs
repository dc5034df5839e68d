use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (sizes, orders, cutoffs).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a structural invariant (symmetry, normalization).
    #[error("data error: {0}")]
    Data(String),

    /// A quadrature or truncation did not reach the requested accuracy.
    #[error("accuracy error: {what} (estimate {estimate:.3e} > tolerance {tolerance:.3e})")]
    Accuracy {
        what: String,
        estimate: f64,
        tolerance: f64,
    },

    /// The single-particle expansion captured too little of the state.
    #[error("truncation error: captured norm {completeness:.6} below {required}; raise the single-particle cutoff")]
    Truncation { completeness: f64, required: f64 },

    /// The Nystrom grid does not cover the kernel support.
    #[error("grid error: {0}")]
    Grid(String),

    /// An eigensolver or iteration failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The Slater rank rule was applied to an inconsistent eigenvalue count.
    #[error("inconsistent spectrum: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Data(_) => "data",
            Error::Accuracy { .. } => "accuracy",
            Error::Truncation { .. } => "truncation",
            Error::Grid(_) => "grid",
            Error::Numeric(_) => "numeric",
            Error::Inconsistent(_) => "inconsistent",
        }
    }

    /// Wraps the message with the parameter point it occurred at.
    pub fn at_point(self, g: f64, epsilon: f64) -> Self {
        let tag = format!(" [g={g}, epsilon={epsilon}]");
        match self {
            Error::Domain(m) => Error::Domain(m + &tag),
            Error::Config(m) => Error::Config(m + &tag),
            Error::Data(m) => Error::Data(m + &tag),
            Error::Accuracy {
                what,
                estimate,
                tolerance,
            } => Error::Accuracy {
                what: what + &tag,
                estimate,
                tolerance,
            },
            Error::Grid(m) => Error::Grid(m + &tag),
            Error::Numeric(m) => Error::Numeric(m + &tag),
            Error::Inconsistent(m) => Error::Inconsistent(m + &tag),
            e @ Error::Truncation { .. } => e,
        }
    }
}
