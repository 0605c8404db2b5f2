use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{IrtError, IrtFit, RefineConfig, ResponseMatrix};
use crate::stats::{min_max_normalize, quantile};

/// Per-item `s = norm(a) + norm(b)`, each min–max normalized over items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub a_norm: Vec<f64>,
    pub b_norm: Vec<f64>,
    pub scores: Vec<f64>,
    /// `a` had no spread and normalized to 0.5 everywhere.
    pub a_degenerate: bool,
    pub b_degenerate: bool,
}

pub fn score_items(fit: &IrtFit) -> Result<ItemScores, IrtError> {
    if fit.a.len() < 2 {
        return Err(IrtError::TooSmall { items: fit.a.len(), candidates: fit.theta.len() });
    }
    let (a_norm, a_degenerate) = min_max_normalize(&fit.a);
    let (b_norm, b_degenerate) = min_max_normalize(&fit.b);
    let scores = a_norm.iter().zip(&b_norm).map(|(x, y)| x + y).collect();
    Ok(ItemScores { a_norm, b_norm, scores, a_degenerate, b_degenerate })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropSelection {
    pub best_candidate: String,
    /// Number of scores the threshold was computed from.
    pub reference_size: usize,
    pub threshold: f64,
    /// Item indices with score strictly below the threshold, ascending.
    pub items: Vec<usize>,
    /// The threshold came from all item scores because the best candidate
    /// answered nothing correctly.
    pub global_fallback: bool,
}

/// Index of the candidate with the highest accuracy; ties go to the higher
/// theta, then to the smaller id.
pub(crate) fn best_candidate(fit: &IrtFit, responses: &ResponseMatrix) -> usize {
    let mut best = 0;
    for j in 1..responses.n_candidates() {
        let (acc_j, acc_b) = (responses.accuracy(j), responses.accuracy(best));
        let better = acc_j > acc_b
            || (acc_j == acc_b
                && (fit.theta[j] > fit.theta[best]
                    || (fit.theta[j] == fit.theta[best] && responses.candidates()[j] < responses.candidates()[best])));
        if better {
            best = j;
        }
    }
    best
}

pub(crate) fn below_quantile(scores: &[f64], reference: &[f64], p: f64) -> (f64, Vec<usize>) {
    let threshold = quantile(reference, p).unwrap_or(f64::NEG_INFINITY);
    let items = scores.iter().enumerate().filter(|(_, s)| **s < threshold).map(|(i, _)| i).collect();
    (threshold, items)
}

/// Items scoring below the `drop_percentage` quantile of the scores of
/// items the best candidate answered correctly. The threshold applies to
/// every item, including ones the best candidate missed.
pub fn select_drop_set(fit: &IrtFit, responses: &ResponseMatrix, config: &RefineConfig) -> Result<DropSelection, IrtError> {
    config.validate()?;
    if fit.items != responses.items() || fit.candidates != responses.candidates() {
        return Err(IrtError::Misaligned);
    }
    let scores = score_items(fit)?.scores;
    let best = best_candidate(fit, responses);
    let reference: Vec<f64> = (0..responses.n_items())
        .filter(|&i| responses.get(i, best) == 1)
        .map(|i| scores[i])
        .collect();
    if reference.is_empty() {
        return Err(IrtError::EmptyReference(responses.candidates()[best].clone()));
    }
    let (threshold, items) = below_quantile(&scores, &reference, config.drop_percentage);
    Ok(DropSelection {
        best_candidate: responses.candidates()[best].clone(),
        reference_size: reference.len(),
        threshold,
        items,
        global_fallback: false,
    })
}
