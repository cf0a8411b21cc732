use thiserror::Error;

/// Errors raised by the model, solver and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("invalid belief ({p1}, {p2}): components must be in [0,1] and sum to 1")]
    InvalidBelief { p1: f64, p2: f64 },

    #[error("invalid {what} matrix: {reason}")]
    InvalidMatrix { what: &'static str, reason: String },

    #[error("Bayes normalizer vanished ({0:e}); the conditioning event has zero probability")]
    ZeroNormalizer(f64),

    #[error("matrix is singular (determinant {0:e})")]
    Singular(f64),

    #[error("compensation fractions are equal (delta_1 = delta_2 = {0}); the incentive function is undefined")]
    EqualCompensation(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("calibration infeasible: {0}")]
    Calibration(String),

    #[error("non-finite value encountered at grid index {index} after {iteration} iterations")]
    NonFinite { index: usize, iteration: usize },
}

pub type Result<T> = std::result::Result<T, FusionError>;
