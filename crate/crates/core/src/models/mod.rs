//! Target models for the factory kernels.

pub mod correlation;
pub mod discrete;
pub mod weibull;

pub use correlation::{CorrelationModel, CorrelationPrior, CorrelationState, CorrelationTuning};
pub use discrete::DiscreteTarget;
pub use weibull::WeibullMixtureTarget;
