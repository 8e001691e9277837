use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dense matrix of order {order} exceeds the dense-work cap of {cap}")]
    Oversize { order: usize, cap: usize },

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error(
        "Procrustes target is rank deficient (sigma_min = {sigma_min:.3e}, sigma_max = {sigma_max:.3e}); \
         the orthonormal factor is not unique. Use gamma < 1 so the (1 - gamma) G term keeps the target full rank"
    )]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("objective increased at outer iteration {iteration}: {before} -> {after}")]
    Monotonicity {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error("inner proximal-gradient step {step} increased the subproblem objective ({before} -> {after}); the Lipschitz estimate is too small")]
    StepSize { step: usize, before: f64, after: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined similarity: {0}")]
    Undefined(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
