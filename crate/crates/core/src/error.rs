use thiserror::Error;

/// Errors produced by tensor-train arithmetic and the Vlasov solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index:?} out of range for mode sizes {sizes:?}")]
    IndexOutOfRange { index: Vec<usize>, sizes: Vec<usize> },

    #[error("dense size guard exceeded: {entries} entries (limit {limit})")]
    SizeGuard { entries: usize, limit: usize },

    #[error("CFL violation on axis {axis}: max normalized displacement {displacement:.6} exceeds {bound}")]
    Cfl {
        axis: usize,
        displacement: f64,
        bound: f64,
    },

    #[error("invalid interpolation scheme: {0}")]
    Scheme(String),

    #[error("invalid operator structure: {0}")]
    Structure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("time axes do not match: {0}")]
    TimeAxis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
