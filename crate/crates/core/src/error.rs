use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// The type is `Clone` so that failed constructions can be cached next to
/// successful ones.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("degenerate tetrahedron: |signed volume| = {volume:e} <= {threshold:e}")]
    DegenerateTetrahedron { volume: f64, threshold: f64 },

    #[error("unsupported degree {requested} (max {max})")]
    UnsupportedDegree { requested: usize, max: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("orthonormalization of {space} failed: Gram deviation {deviation:e}")]
    ConditioningFailure { space: String, deviation: f64 },

    #[error("numerical rank of {space} is {found}, expected {expected}")]
    RankMismatch {
        space: String,
        expected: usize,
        found: usize,
    },

    #[error("constraint system is infeasible: consistency gap {gap:e} > {tolerance:e}")]
    Infeasible { gap: f64, tolerance: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("incompatible data: {0}")]
    IncompatibleData(String),

    #[error("property violation in {check} (trial {trial}): {violation:e}")]
    PropertyViolation {
        check: String,
        trial: usize,
        violation: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
