use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),

    #[error("offset {radius} lies beyond the Green's function table range {max} and extrapolation is disabled")]
    TableMissing { radius: f64, max: f64 },

    #[error("table resolution too coarse: estimated aliasing error {estimate:.3e} exceeds {limit:.1e} of peak")]
    ResolutionTooCoarse { estimate: f64, limit: f64 },

    #[error("invalid probe range: {0}")]
    ProbeRangeInvalid(String),

    #[error("grid would hold {count} centers, more than the cap of {cap}")]
    TooManyCenters { count: usize, cap: usize },

    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("solver did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("support columns are rank deficient (rank {rank} < {size})")]
    RankDeficientSupport { rank: usize, size: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(std::io::Error::other(e))
    }
}
