use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failed to reach tolerance {tolerance:e} within {subdivisions} subdivisions (estimate {estimate}, error {error:e})")]
    Quadrature {
        estimate: f64,
        error: f64,
        tolerance: f64,
        subdivisions: usize,
    },

    #[error("tie probability {0} lies outside [0, 1] beyond quadrature tolerance")]
    ProbabilityOvershoot(f64),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("information matrix is singular (condition number {condition:e})")]
    SingularInformation { condition: f64 },

    #[error("MCMC chain aborted at iteration {iteration}: {source}; chain state {state}")]
    ChainAborted {
        iteration: usize,
        state: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical routine (quadrature, inversion, MCMC).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Quadrature { .. }
            | Error::ProbabilityOvershoot(_)
            | Error::SingularInformation { .. } => true,
            Error::ChainAborted { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
