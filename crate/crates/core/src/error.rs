use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad CSV header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("internal error: {0}")]
    Internal(String),
    #[error("ill-conditioned system; reduce C_r or add jitter (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("QP solver did not converge after {iterations} updates (KKT residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },
    #[error("model format error: {0}")]
    ModelFormat(String),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
