use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{value} lies outside the domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("demand and supply curves do not cross within their common quantity range")]
    NoIntersection,

    #[error("no {side} bids on {day}")]
    MissingSide { side: String, day: chrono::NaiveDate },

    #[error(
        "no prior draw passed the distance gates after {attempts} attempts \
         (closest distances seen: {best_distances:?})"
    )]
    BootstrapFailure {
        attempts: usize,
        best_distances: [f64; 3],
    },

    #[error("curve cannot be rebuilt from {n} particles: jump at {location} has size {size}")]
    Reconstruction { location: f64, size: f64, n: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
