use thiserror::Error;

/// Errors raised across simulation and estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model parameter is outside the family's admissible domain.
    #[error("parameter domain error: {0}")]
    ParameterDomain(String),

    #[error("kernel family {family} is not twice differentiable at the origin; use the mollified OU kernel instead")]
    NotTwiceDifferentiable { family: &'static str },

    /// The family does not expose the requested derivative at the origin.
    #[error("unsupported capability: {0}")]
    Unsupported(String),

    /// Local increment variance vanished or cancelled numerically.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("drift parameter is not identifiable: {0}")]
    UnidentifiableDrift(String),

    /// Fourth-derivative estimate too small to invert for the RQ shape parameter.
    #[error("gamma is unidentified at this sample: K4 estimate {k4} <= 3*alpha*beta^4 = {bound}")]
    GammaUnidentified { k4: f64, bound: f64 },

    #[error("root not found: {0}")]
    RootNotFound(String),

    #[error("information matrix is not invertible: {0}")]
    NonInvertibleInformation(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    /// Non-finite values or quadrature failure.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by malformed configuration or inputs rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Io(_) | Error::InvalidInput(_) | Error::ParameterDomain(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
