use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("state within {tolerance:e} of the body boundary")]
    Boundary { tolerance: f64 },

    #[error("invalid chain state: {0}")]
    InvalidState(String),

    #[error("certificate error: {0}")]
    Certificate(String),

    #[error("precondition violated: {message} (minimal n = {min_n})")]
    Precondition { message: String, min_n: f64 },

    #[error("size overflow: {0}")]
    Size(String),

    #[error("unsupported: {0}")]
    Capability(String),

    #[error("tolerance cannot be certified: {0}")]
    Tolerance(String),

    #[error("memory budget exceeded: {0}")]
    Budget(String),

    #[error("integrability: {0}")]
    Integrability(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("schema error: missing column `{0}`")]
    Schema(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("update failed at step {index}: {source}")]
    Step { index: usize, source: Box<Error> },

    #[error("candidate {index} failed: {source}")]
    Candidate { index: usize, source: Box<Error> },

    #[error("no sandwich in cover for anchor {witness:?}")]
    NoSandwich { witness: Vec<f64> },

    #[error("numerical certificate failed: {0}")]
    CertificateFailure(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors that indicate a violated numerical certificate rather
    /// than bad input.
    pub fn is_certificate_failure(&self) -> bool {
        match self {
            Error::CertificateFailure(_) | Error::NoSandwich { .. } => true,
            Error::Step { source, .. } | Error::Candidate { source, .. } => source.is_certificate_failure(),
            _ => false,
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Parameter(_) | Error::Parse(_) | Error::Schema(_))
    }
}
