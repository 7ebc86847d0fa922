use thiserror::Error;

use crate::backtest::LoadError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The matrix failed the positive-definiteness or conditioning gate.
    #[error("singular covariance matrix (p = {dim}, window size {window}, rcond {rcond:.3e})")]
    Singular {
        dim: usize,
        /// Number of observations behind the matrix; `None` for a population matrix.
        window: WindowSize,
        rcond: f64,
    },

    #[error("degenerate target: 1'S^-1 1 * b'Sb - 1 = {excess:.3e} (target coincides with the sample GMV portfolio)")]
    DegenerateTarget { excess: f64 },

    #[error("degenerate shrinkage denominator")]
    DegenerateDenominator,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined limit: {0}")]
    UndefinedLimit(String),

    #[error("missing input for {0}")]
    MissingInput(&'static str),

    #[error("out-of-sample window too short: m = {m} must exceed p = {p}")]
    OutOfSampleTooShort { p: usize, m: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-stationary parameters: {0}")]
    NonStationary(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Load(#[from] LoadError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical pipeline on otherwise valid input
    /// (singular windows, degenerate targets), as opposed to bad arguments.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Singular { .. }
                | Error::DegenerateTarget { .. }
                | Error::DegenerateDenominator
                | Error::UndefinedLimit(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSize(pub Option<usize>);

impl std::fmt::Display for WindowSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(t) => write!(f, "{t}"),
            None => f.write_str("population"),
        }
    }
}
