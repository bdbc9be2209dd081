use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sizing error: {0}")]
    Sizing(String),

    #[error("unsupported derivative order: {0}")]
    UnsupportedOrder(String),

    #[error("singular kernel argument: {0}")]
    Singularity(String),

    #[error("iteration limit reached after {iterations} iterations (residual {residual:.3e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("quadrature did not converge (error estimate {estimate:.3e})")]
    Quadrature { estimate: f64 },

    #[error("CFL violation: dt*vmax/hx = {ratio:.4} exceeds limit {limit}")]
    Cfl { ratio: f64, limit: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("blow-up: {0}")]
    BlowUp(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("range error for `{key}`: {message}")]
    Range { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
