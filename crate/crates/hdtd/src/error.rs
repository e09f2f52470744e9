use thiserror::Error;

/// Errors produced by estimators, tests, simulation and file parsing.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An eigenvalue fell below the negative tolerance band of a matrix that
    /// must be positive semidefinite.
    #[error(
        "matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e}, tolerance {tol:.3e})"
    )]
    NotPositiveSemiDefinite { eigenvalue: f64, tol: f64 },

    /// The matrix is singular (or numerically indefinite) where a positive
    /// definite matrix is required.
    #[error("matrix is singular or not positive definite (eigenvalue {eigenvalue:.3e}, tolerance {tol:.3e})")]
    SingularMatrix { eigenvalue: f64, tol: f64 },

    /// The sample has fewer matrices than the estimator needs.
    #[error("sample too small for {what}: need n >= {needed}, got n = {got}")]
    SampleTooSmall {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    /// An estimator that must be positive (or nonzero) came out degenerate,
    /// so the downstream test statistic is undefined.
    #[error("degenerate sample: estimator {estimator} = {value:.6e} leaves the test undefined")]
    DegenerateSample { estimator: &'static str, value: f64 },

    /// The scale estimate k for the known-covariance test is nonpositive.
    #[error("nonpositive scale estimate k = {0:.6e}; data are inconsistent with the null scaling")]
    NonpositiveScale(f64),

    /// A power bound was requested at (or numerically at) the null itself.
    #[error("alternative coincides with the null: {0}")]
    NullAlternative(&'static str),

    /// Invalid model, covariance or experiment configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Shapes or declared dimensions disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A non-finite value was found where finite data are required.
    #[error("non-finite value in matrix {index} at entry ({row}, {col})")]
    NonFinite {
        index: usize,
        row: usize,
        col: usize,
    },

    /// Input text could not be parsed.
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
