use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("problem is not strongly convex (estimated mu = {mu:e})")]
    DegenerateStrongConvexity { mu: f64 },

    #[error("degenerate similarity: beta_hat = {beta:e} <= mu_hat = {mu:e}; run plain SONATA (delta = 0) instead")]
    DegenerateSimilarity { beta: f64, mu: f64 },

    #[error("problem is already perfectly conditioned (kappa_hat = {kappa})")]
    PerfectlyConditioned { kappa: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("insufficient data: {available} samples for {agents} agents")]
    InsufficientData { available: usize, agents: usize },

    #[error("could not draw a connected graph in {attempts} attempts")]
    TopologyGenerationFailed { attempts: usize },

    #[error("target rho {target} is unreachable from base rho {base} with polynomial gossip")]
    UnreachableTarget { base: f64, target: f64 },

    #[error("instance needs {required} nodes, more than the allowed {max}")]
    InstanceTooLarge { required: usize, max: usize },

    #[error("chebyshev gossip verification failed: measured rho {measured:e} exceeds bound {bound:e}")]
    ChebyshevVerification { measured: f64, bound: f64 },

    #[error("centralized oracle did not converge in {iters} iterations (residual {residual:e})")]
    OracleNotConverged { iters: usize, residual: f64 },

    #[error("config error at `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { field: field.into(), msg: msg.into() }
    }
}
