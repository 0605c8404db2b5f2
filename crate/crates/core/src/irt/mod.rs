//! Two-parameter logistic IRT: model, response matrices, fitting, item
//! scoring and the drop-and-resample refinement loop.

mod fit;
mod matrix;
mod refine;
mod score;
mod sim;

pub use fit::{fit_2pl, log_likelihood, FitConfig, InitPolicy, IrtFit};
pub use matrix::ResponseMatrix;
pub use refine::{refine, refine_observed, CallbackError, RefineConfig, RefineError, RefineReport, ResamplePolicy, RoundReport};
pub use score::{score_items, select_drop_set, DropSelection, ItemScores};
pub use sim::SimulatedPopulation;

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IrtError {
    #[error("non-finite argument: {0}")]
    NonFinite(&'static str),
    #[error("response matrix: {0}")]
    Matrix(String),
    #[error("need at least 2 items and 2 candidates, got {items} x {candidates}")]
    TooSmall { items: usize, candidates: usize },
    #[error("every response is identical; nothing to fit")]
    Constant,
    #[error("fit and responses are not aligned")]
    Misaligned,
    #[error("best candidate '{0}' answered nothing correctly; fall back to the global score quantile")]
    EmptyReference(String),
    #[error("invalid config: {0}")]
    Config(String),
}

/// `1 / (1 + exp(-a (theta - b)))`, evaluated without overflow.
pub fn p_correct(a: f64, b: f64, theta: f64) -> Result<f64, IrtError> {
    if !a.is_finite() {
        return Err(IrtError::NonFinite("a"));
    }
    if !b.is_finite() {
        return Err(IrtError::NonFinite("b"));
    }
    if !theta.is_finite() {
        return Err(IrtError::NonFinite("theta"));
    }
    Ok(logistic(a * (theta - b)))
}

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(logistic(z))`.
pub(crate) fn log_logistic(z: f64) -> f64 {
    if z >= 0.0 {
        -libm::log1p(libm::exp(-z))
    } else {
        z - libm::log1p(libm::exp(z))
    }
}
