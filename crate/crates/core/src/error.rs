use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("edge ({u}, {v}) has invalid weight {weight}")]
    InvalidWeight { u: usize, v: usize, weight: f64 },
    #[error("vertex index {index} out of range for graph with {p} vertices")]
    VertexOutOfRange { index: usize, p: usize },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {found} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("column {0} has zero variance")]
    ZeroVariance(usize),
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("dataset is not standardized")]
    NotStandardized,
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value encountered at coordinate {coordinate} in sweep {sweep}")]
    NonFinite { coordinate: usize, sweep: usize },
    #[error("empty path: lambda_max is zero")]
    EmptyPath,
    #[error("matrix is singular or numerically indefinite ({0})")]
    Singular(&'static str),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no samples in {0}")]
    NoSamples(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, used in CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SelfLoop(_) => "E_SELF_LOOP",
            Error::InvalidWeight { .. } => "E_INVALID_WEIGHT",
            Error::VertexOutOfRange { .. } => "E_VERTEX_RANGE",
            Error::DuplicateEdge(..) => "E_DUPLICATE_EDGE",
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::ZeroVariance(_) => "E_ZERO_VARIANCE",
            Error::TooFewSamples { .. } => "E_TOO_FEW_SAMPLES",
            Error::NotStandardized => "E_NOT_STANDARDIZED",
            Error::InvalidPenalty(_) => "E_INVALID_PENALTY",
            Error::InvalidArgument(_) => "E_INVALID_ARGUMENT",
            Error::NonFinite { .. } => "E_NON_FINITE",
            Error::EmptyPath => "E_EMPTY_PATH",
            Error::Singular(_) => "E_SINGULAR",
            Error::Parse { .. } => "E_PARSE",
            Error::NoSamples(_) => "E_NO_SAMPLES",
            Error::Io(_) => "E_IO",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
