use thiserror::Error;

/// Errors raised by scene construction, channel synthesis, detection and the
/// experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid dimension {0} is not a positive power of two")]
    NotPowerOfTwo(usize),

    #[error("element ({col}, {row}) is outside the {n_h}x{n_v} grid")]
    IndexOutOfRange {
        col: usize,
        row: usize,
        n_h: usize,
        n_v: usize,
    },

    #[error("invalid defect rectangle: {0}")]
    InvalidRect(String),

    #[error("mask contains no defective element")]
    NoDefect,

    #[error("stuck-phase map does not match the defect rectangle: {0}")]
    StuckPhaseMismatch(String),

    #[error("phase assignment has {got} entries, grid has {expected}")]
    AssignmentLength { expected: usize, got: usize },

    #[error("non-finite phase value at element index {0}")]
    NonFinitePhase(usize),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("initialization phases must differ")]
    SingularDesign,

    #[error("pilot must be nonzero")]
    InvalidPilot,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
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

pub type Result<T> = std::result::Result<T, Error>;
