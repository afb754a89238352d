//! Numerically stable softmax and argmax selection.

use crate::error::CoreError;
use crate::exec;
use crate::types::{LogitVector, ProbDistribution, TokenId};

fn check_temperature(temperature: f64) -> Result<(), CoreError> {
    if temperature.is_finite() && temperature > 0.0 {
        Ok(())
    } else {
        Err(CoreError::InvalidTemperature(temperature))
    }
}

fn finite_max(scores: &[f64]) -> Result<f64, CoreError> {
    scores
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .reduce(f64::max)
        .ok_or(CoreError::EmptySupport)
}

/// Softmax of `logits / temperature`. Masked (`-inf`) entries get exactly 0;
/// the maximum finite logit is subtracted before exponentiation.
pub fn softmax(logits: &LogitVector, temperature: f64) -> Result<ProbDistribution, CoreError> {
    softmax_slice(logits.as_slice(), temperature)
}

pub(crate) fn softmax_slice(
    scores: &[f64],
    temperature: f64,
) -> Result<ProbDistribution, CoreError> {
    check_temperature(temperature)?;
    let max = finite_max(scores)?;
    let weights = exec::map_by(scores.len(), |i| {
        let x = scores[i];
        if x.is_finite() {
            ((x - max) / temperature).exp()
        } else {
            0.0
        }
    });
    // The max entry contributes exp(0) = 1, so the total is >= 1.
    let total = exec::sum(&weights);
    let probs = exec::map_by(weights.len(), |i| weights[i] / total);
    Ok(ProbDistribution::from_vec_unchecked(probs))
}

/// Log-softmax of `logits / temperature`; masked entries stay `-inf`.
pub fn log_softmax(logits: &LogitVector, temperature: f64) -> Result<Vec<f64>, CoreError> {
    check_temperature(temperature)?;
    let scores = logits.as_slice();
    let max = finite_max(scores)?;
    let total = exec::sum_by(scores.len(), |i| {
        let x = scores[i];
        if x.is_finite() {
            ((x - max) / temperature).exp()
        } else {
            0.0
        }
    });
    let log_total = total.ln();
    Ok(exec::map_by(scores.len(), |i| {
        let x = scores[i];
        if x.is_finite() {
            (x - max) / temperature - log_total
        } else {
            f64::NEG_INFINITY
        }
    }))
}

/// Index of the largest entry; ties go to the lowest index.
///
/// Accepts anything viewable as a score slice ([`LogitVector`],
/// [`ProbDistribution`], plain slices).
///
/// # Panics
///
/// Panics on an empty input.
pub fn argmax_token<S: AsRef<[f64]> + ?Sized>(scores: &S) -> TokenId {
    let scores = scores.as_ref();
    assert!(!scores.is_empty(), "argmax of an empty vector");
    let mut best = 0;
    for (i, &x) in scores.iter().enumerate().skip(1) {
        if x > scores[best] {
            best = i;
        }
    }
    best as TokenId
}
