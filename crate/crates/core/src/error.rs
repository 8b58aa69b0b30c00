use thiserror::Error;

/// Errors raised while building grids, assembling operators or solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("refinement level {level} exceeds the supported maximum {max}")]
    LevelTooLarge { level: u32, max: u32 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("no boundary face is tagged catalytic for span ({start}, {end})")]
    EmptyCatalyticSet { start: f64, end: f64 },

    #[error("grid has not been tagged")]
    Untagged,

    #[error("diffusion coefficient must be positive, got {0}")]
    NonPositiveDiffusion(f64),

    #[error("expected {expected} inlet values (one per species), got {got}")]
    SpeciesMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("factorization of the {what} failed: {reason}")]
    Factorization { what: String, reason: String },

    #[error("basis solve for catalytic node {index} failed: {source}")]
    BasisSolve {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid basis partition: {0}")]
    InvalidPartition(String),

    #[error("{solver} Newton solver did not converge in {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("unknown reaction model '{0}'")]
    UnknownModel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("basis file error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
