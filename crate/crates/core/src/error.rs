use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its subdivision limit. The partial value is kept
    /// so callers can decide whether it is still usable.
    #[error(
        "integral did not converge after {evals} evaluations \
         (partial value {value:e}, error estimate {error:e})"
    )]
    NonConvergence { value: f64, error: f64, evals: u64 },

    #[error("integrand is not finite at {at:e}")]
    NonFinite { at: f64 },

    #[error("sampling budget exhausted: best estimate {estimate} +/- {error}")]
    BudgetExhausted { estimate: f64, error: f64 },

    #[error("rejection acceptance rate {rate:e} is below 1e-3")]
    LowAcceptance { rate: f64 },

    #[error("divergent {what}: {detail}")]
    Divergent { what: String, detail: String },

    #[error("balance condition fails: p(a+1) = {lhs}, q(b+1) = {rhs}")]
    Unbalanced { lhs: f64, rhs: f64 },

    #[error("inadmissible weights: {0}")]
    Inadmissible(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn divergent(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Divergent {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
