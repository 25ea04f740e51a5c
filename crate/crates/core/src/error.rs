use thiserror::Error;

/// Errors raised while validating, solving or simulating the model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error: {constraint} violated ({detail})")]
    Domain {
        constraint: &'static str,
        detail: String,
    },

    #[error("job-distribution equation has no root on [0, inf) ({0})")]
    NoRoot(String),

    #[error("capital demand is unbounded: lambda_theta - kappa*eta_Q*eta_Q_theta = {margin:.6e} <= 0")]
    UnboundedCapitalDemand { margin: f64 },

    #[error("non-finite value while computing {0}")]
    NonFinite(&'static str),

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("no convergence after {iterations} iterations (last change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("capital left the policy grid at period {period} (K = {k})")]
    GridExit { period: usize, k: f64 },

    #[error("invalid theta redraw process: {0}")]
    InvalidProcess(String),

    #[error("empty firm panel")]
    EmptyPanel,
}

impl ModelError {
    pub(crate) fn domain(constraint: &'static str, detail: impl Into<String>) -> Self {
        ModelError::Domain {
            constraint,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Exponentiate a log-magnitude, refusing anything that would overflow.
pub(crate) fn checked_exp(x: f64, what: &'static str) -> Result<f64> {
    if !x.is_finite() || x.abs() > 700.0 {
        return Err(ModelError::NonFinite(what));
    }
    Ok(x.exp())
}
