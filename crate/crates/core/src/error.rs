use thiserror::Error;

/// Errors shared across the simulator, the mean-field solver and the
/// analysis toolbox.
#[derive(Debug, Error)]
pub enum AngioError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("stability violation: {0}")]
    Stability(String),

    #[error("numerical failure at step {step}: {msg}")]
    Numerical { step: usize, msg: String },

    #[error("bound violation at node {node:?}: {msg}")]
    BoundViolation { node: [usize; 3], msg: String },

    #[error("particle cap {cap} exceeded at t = {time}")]
    ParticleCap { cap: usize, time: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AngioError>;

impl AngioError {
    /// CLI exit code bucket: 1 usage/config, 2 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            AngioError::Config { .. }
            | AngioError::InvalidParameter(_)
            | AngioError::Domain(_)
            | AngioError::Unsupported(_)
            | AngioError::Io(_) => 1,
            _ => 2,
        }
    }
}
