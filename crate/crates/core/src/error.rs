use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate {0}")]
    NonFinite(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid scenery: {0}")]
    InvalidScenery(String),

    #[error("invalid step law: {0}")]
    InvalidLaw(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("duplicate generators at positions {0} and {1}")]
    DuplicateGenerators(usize, usize),

    #[error("no recurrent rotation found: {0}")]
    RotationNotFound(String),

    #[error(
        "multiplier search exhausted after {attempts} draws \
         (best min distance {best_distance:e}, best min modulus {best_modulus:e})"
    )]
    MultipliersExhausted {
        attempts: usize,
        best_distance: f64,
        best_modulus: f64,
    },

    #[error("missing spatial Fourier table of order {0}")]
    MissingLowerOrder(usize),

    #[error("distinctness check failed: {0}")]
    Distinctness(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
