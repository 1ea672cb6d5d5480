use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown parameter `{name}` at line {line}")]
    UnknownParameter { name: String, line: usize },

    #[error("tree weights sum to {sum}, expected 1")]
    WeightSum { sum: String },

    #[error("order constraints form a cycle through `{name}`")]
    CyclicOrder { name: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("expected a parameter vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("category `{tree}/{category}` has zero probability at theta = {theta:?}")]
    Singular {
        tree: String,
        category: String,
        theta: Vec<f64>,
    },

    #[error("Fisher information determinant {det:e} is significantly negative at theta = {theta:?}")]
    NegativeDeterminant { det: f64, theta: Vec<f64> },

    #[error("all {proposals} Monte Carlo proposals fell outside the constrained region")]
    EmptyRegion { proposals: u64 },

    #[error("{failures} of {samples} Monte Carlo samples failed numerically (limit 0.1%)")]
    NumericalFailureRate { failures: u64, samples: u64 },

    #[error("outcome space has {count} outcomes, above the enumeration cap of {cap}")]
    EnumerationRefused { count: String, cap: u64 },

    #[error("maximum-likelihood search did not converge: {0}")]
    NonConvergence(String),

    #[error("unknown zoo model `{0}`")]
    UnknownModel(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures that come from floating-point computation rather than
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NegativeDeterminant { .. }
                | Error::EmptyRegion { .. }
                | Error::NumericalFailureRate { .. }
                | Error::NonConvergence(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
