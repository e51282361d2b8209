use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid domain: {0}")]
    DomainInvalid(String),
    #[error("geometric ambiguity: {0}")]
    GeometricAmbiguity(String),
    #[error("mesh quality: {0}")]
    MeshQuality(String),
    #[error("Morse condition violated: {0}")]
    MorseViolation(String),
    #[error("Morse-Smale transversality violated: {0}")]
    MorseSmaleViolation(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("weight overflow: exponent {exponent:.3e} exceeds the floating range; rescale f to f - max f or lower T")]
    Overflow { exponent: f64 },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("eigensolver did not converge: {msg} (best residuals {residuals:?})")]
    Solver { msg: String, residuals: Vec<f64> },
    #[error("flow integration failure: {0}")]
    Integration(String),
    #[error("inconsistent complex: {0}")]
    ComplexInconsistency(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::DomainInvalid(_)
            | Error::Configuration(_)
            | Error::GeometricAmbiguity(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
