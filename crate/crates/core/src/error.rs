use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("truncation leakage {leakage:.3e} exceeds threshold {threshold:.1e}")]
    Truncation { leakage: f64, threshold: f64 },

    #[error("stabilizer expectation {0:.3e} below sharpness floor")]
    DegenerateSharpness(f64),

    #[error("outcome density {0:.3e} below floor")]
    ZeroProbability(f64),

    #[error("invalid circuit regime: {0}")]
    InvalidRegime(String),

    #[error("outside model regime: {0}")]
    Regime(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("quadrature missed tolerance: estimate {estimate:.6e}, error {error:.2e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
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
