use thiserror::Error;

/// Errors raised by the decomposition, rate, capacity and coding routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("peak constraint violated: {used} > gamma*A = {limit}")]
    PeakViolation { used: f64, limit: f64 },

    #[error("average constraint violated: {used} > gamma*E = {limit}")]
    AverageViolation { used: f64, limit: f64 },

    #[error("noise table with 2^{n_bits} entries exceeds the cap of {cap} entries")]
    TableTooLarge { n_bits: u32, cap: usize },

    #[error("exact enumeration needs {required} (input, noise) pairs, budget is {budget}; use the Monte Carlo estimator")]
    EnumerationBudget { required: u128, budget: u128 },

    #[error("Blahut-Arimoto did not converge after {iterations} iterations (duality gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
