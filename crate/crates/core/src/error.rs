use thiserror::Error;

/// Errors raised by simulation, estimation and limit-constant evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "circulant embedding has a negative eigenvalue {min_eigenvalue:e} \
         (max {max_eigenvalue:e}); use the cholesky sampler instead"
    )]
    NegativeCirculantEigenvalue {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("mixing law `{law}` violates the integrability condition on its characteristic function: {detail}")]
    AssumptionViolated { law: String, detail: String },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error(
        "quadrature did not converge within budget: estimate {estimate:e} \
         with error bound {error:e} after {evaluations} evaluations"
    )]
    QuadratureBudget {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("config field `{field}`: {constraint}")]
    Config { field: String, constraint: String },

    #[error("replicate {replicate} at L = {l}: {source}")]
    Replicate {
        replicate: u64,
        l: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
