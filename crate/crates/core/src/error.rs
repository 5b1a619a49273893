use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vehicle distance became non-positive ({distance:.6} m)")]
    DistanceNonPositive { distance: f64 },

    #[error("trajectory failed at slot {slot}: {source}")]
    Trajectory {
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{what} is ill-conditioned (condition number {condition:e})")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("angle is not identifiable: Schur complement {0:e} is not positive")]
    NonIdentifiable(f64),

    #[error("rate target out of range: {0}")]
    TargetOutOfRange(String),

    #[error("conic program is infeasible")]
    Infeasible,

    #[error("conic solver failed: {0}")]
    NumericalFailure(String),

    #[error("no feasible point at the initial targets (lambda={lambda}, varrho={varrho})")]
    NoFeasiblePoint { lambda: f64, varrho: f64 },

    #[error("no randomization candidate satisfies every constraint (best margin {best_margin:e})")]
    NoFeasibleCandidate { best_margin: f64 },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
