use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A factory ran past its loop budget. This signals a bound that is too
    /// loose to be usable, not a logic error.
    #[error("Bernoulli factory exceeded its loop budget of {max_loops} loops")]
    LoopBudgetExceeded { max_loops: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("model contract violated: {0}")]
    ModelContract(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Strips any step annotation and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }
}
