use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular design: condition number of Z'Z is {condition:.3e} (cap {cap:.1e})")]
    SingularDesign { condition: f64, cap: f64 },

    #[error("degenerate degrees of freedom: T = {t} must exceed (d+1)L = {k}")]
    DegenerateDegrees { t: usize, k: usize },

    #[error("degenerate variance in {test}: {detail}")]
    DegenerateVariance { test: &'static str, detail: String },

    #[error("degenerate bootstrap distribution: sd of bootstrap sum statistic is {sd}")]
    DegenerateBootstrap { sd: f64 },

    #[error("nonpositive long-run variance {value:.6e} for asset {index}")]
    DegenerateLongRunVariance { index: usize, value: f64 },

    #[error("bootstrap plan error: {0}")]
    Plan(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("block-length selection failed: {0}")]
    Selection(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariance matrix is indefinite: smallest eigenvalue {min_eigenvalue:.3e}")]
    Covariance { min_eigenvalue: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("replication {replication} (seed {seed}) failed: {source}")]
    Replication {
        replication: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
