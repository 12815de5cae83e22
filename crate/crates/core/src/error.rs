use nalgebra::DVector;
use thiserror::Error;

use crate::inner::InnerResult;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} outside the domain of {func}")]
    ScalarDomain { func: &'static str, value: f64 },

    #[error("point is outside the objective domain: {0}")]
    Domain(String),

    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("Hessian has negative curvature {curvature:e} along the query direction")]
    NotPositiveSemidefinite { curvature: f64 },

    #[error("inner solver exhausted its budget with gap {:e}", .0.gap)]
    InnerBudgetExhausted(Box<InnerResult>),

    #[error("active set bookkeeping drifted by {drift:e}")]
    Inconsistent { drift: f64 },

    #[error("infeasible starting point")]
    Infeasible,

    #[error("{0} is not supported by this feasible set or problem")]
    Unsupported(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error{}: {msg}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data { line: None, msg: msg.into() }
    }

    pub fn data_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Data { line: Some(line), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(v: &DVector<f64>, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Dimension { expected, got: v.len() });
    }
    Ok(())
}
