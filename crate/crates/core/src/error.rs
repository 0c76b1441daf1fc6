use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the library.
///
/// Every variant knows which module produced it (see [`Error::module`]), so
/// front ends can report `module: message` without extra bookkeeping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: {name} = {value} is outside {expected}")]
    Domain {
        module: &'static str,
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("spectral: {n_modes} modes cannot be resolved on {n_points} grid points (need at least {} points)", 2 * n_modes)]
    Aliasing { n_modes: usize, n_points: usize },

    #[error("{module}: size mismatch, expected {expected} got {actual} ({what})")]
    SizeMismatch {
        module: &'static str,
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("fbm: covariance factorization failed: {0}")]
    Covariance(String),

    #[error(
        "fbm: circulant embedding eigenvalue {index} is {eigenvalue:e} (not nonnegative definite)"
    )]
    Embedding { index: usize, eigenvalue: f64 },

    #[error("fbm: no path for mode {mode}, trajectory {traj}")]
    MissingPath { mode: usize, traj: usize },

    #[error("fbm: malformed ensemble dump: {0}")]
    Dump(String),

    #[error("cq: weight table holds {available} weights but {needed} are required")]
    WeightsTooShort { needed: usize, available: usize },

    #[error("mlf: {0}")]
    NonConvergence(String),

    #[error("solver: non-finite coefficient in mode {mode} at time level {level}")]
    NonFinite { mode: usize, level: usize },

    #[error("solver: {0}")]
    Incompatible(String),

    #[error("experiments: {0}")]
    Uncoupled(String),

    #[error("experiments: level {level}, trajectory {traj}: {source}")]
    Study {
        level: usize,
        traj: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("experiments: invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cli: key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("cli: {path}: {source}")]
    Path {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("experiments: csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("experiments: json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(
        module: &'static str,
        name: &'static str,
        value: f64,
        expected: &'static str,
    ) -> Self {
        Error::Domain {
            module,
            name,
            value,
            expected,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Name of the module that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Domain { module, .. } | Error::SizeMismatch { module, .. } => module,
            Error::Aliasing { .. } => "spectral",
            Error::Covariance(_)
            | Error::Embedding { .. }
            | Error::MissingPath { .. }
            | Error::Dump(_) => "fbm",
            Error::WeightsTooShort { .. } => "cq",
            Error::NonConvergence(_) => "mlf",
            Error::NonFinite { .. } | Error::Incompatible(_) => "solver",
            Error::Uncoupled(_)
            | Error::Study { .. }
            | Error::InvalidConfig(_)
            | Error::Csv(_)
            | Error::Json(_) => "experiments",
            Error::Config { .. } | Error::Path { .. } => "cli",
            Error::Io(_) => "io",
        }
    }
}
