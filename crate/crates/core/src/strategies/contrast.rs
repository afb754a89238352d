//! Contrastive next-token distributions: the fixed-weight baseline and the
//! description-contrastive step with divergence-driven weight and cutoff.

use serde::{Deserialize, Serialize};

use crate::divergence::{restriction_params, Restriction};
use crate::error::CoreError;
use crate::prob::{softmax, softmax_slice};
use crate::types::{LogitVector, ProbDistribution, TokenId};

const NEG_INF: f64 = f64::NEG_INFINITY;

fn check_lengths(a: &LogitVector, b: &LogitVector) -> Result<(), CoreError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(CoreError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        })
    }
}

/// `(1 + α)·expert − α·amateur`, with `-inf` wherever either side is masked.
/// With `α = 0` the amateur is ignored and the expert passes through.
fn fixed_contrast(expert: &[f64], amateur: &[f64], alpha: f64) -> Vec<f64> {
    if alpha == 0.0 {
        return expert.to_vec();
    }
    expert
        .iter()
        .zip(amateur)
        .map(|(&e, &a)| {
            if e.is_finite() && a.is_finite() {
                (1.0 + alpha) * e - alpha * a
            } else {
                NEG_INF
            }
        })
        .collect()
}

/// Softmax of the fixed-weight contrast of expert and amateur logits.
pub fn cd_distribution(
    logits_expert: &LogitVector,
    logits_amateur: &LogitVector,
    alpha: f64,
) -> Result<ProbDistribution, CoreError> {
    check_lengths(logits_expert, logits_amateur)?;
    if alpha == 0.0 {
        return softmax(logits_expert, 1.0);
    }
    let contrast = fixed_contrast(logits_expert.as_slice(), logits_amateur.as_slice(), alpha);
    softmax_slice(&contrast, 1.0)
}

/// Tokens whose probability is at least `beta` times the maximum, ascending.
/// Every argmax token qualifies for any `beta ≤ 1`.
pub fn plausibility_head(p_base: &ProbDistribution, beta: f64) -> Vec<TokenId> {
    let probs = p_base.as_slice();
    let threshold = beta * p_base.max();
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= threshold)
        .map(|(i, _)| i as TokenId)
        .collect()
}

fn head_mask(n: usize, head: &[TokenId]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &id in head {
        mask[id as usize] = true;
    }
    mask
}

/// Result of one contrastive step, before a token is selected.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastStep {
    /// Softmax (temperature 1) of [`Self::contrasted_logits`].
    pub distribution: ProbDistribution,
    /// Contrast with every token outside the head set at `-inf`.
    pub contrasted_logits: LogitVector,
    pub head_set: Vec<TokenId>,
    /// Divergence-derived for the description-contrastive step; the fixed
    /// parameters (and no divergence) for the baseline.
    pub divergence: Option<f64>,
    pub alpha_t: f64,
    pub beta_t: f64,
}

impl ContrastStep {
    pub fn into_record(
        self,
        step: usize,
        logits_v: LogitVector,
        logits_d: LogitVector,
        chosen: TokenId,
    ) -> StepRecord {
        StepRecord {
            step,
            logits_v,
            logits_d: Some(logits_d),
            divergence: self.divergence,
            alpha_t: self.alpha_t,
            beta_t: self.beta_t,
            head_set: self.head_set,
            contrasted_logits: self.contrasted_logits,
            chosen,
        }
    }
}

/// Fixed-weight contrastive step: contrast by `alpha`, keep tokens whose
/// expert probability clears `beta · max`.
pub fn cd_fixed_step(
    logits_expert: &LogitVector,
    logits_amateur: &LogitVector,
    alpha: f64,
    beta: f64,
) -> Result<ContrastStep, CoreError> {
    check_lengths(logits_expert, logits_amateur)?;
    let p_expert = softmax(logits_expert, 1.0)?;
    let head_set = plausibility_head(&p_expert, beta);
    let mask = head_mask(logits_expert.len(), &head_set);
    let mut contrast = fixed_contrast(logits_expert.as_slice(), logits_amateur.as_slice(), alpha);
    for (x, keep) in contrast.iter_mut().zip(&mask) {
        if !keep {
            *x = NEG_INF;
        }
    }
    let distribution = softmax_slice(&contrast, 1.0)?;
    Ok(ContrastStep {
        distribution,
        contrasted_logits: LogitVector::from_vec_unchecked(contrast),
        head_set,
        divergence: None,
        alpha_t: alpha,
        beta_t: beta,
    })
}

/// Description-contrastive step.
///
/// 1. `P_v`, `P_d` are softmaxes of the two logit vectors at temperature 1.
/// 2. `D = bounded_divergence(P_v, P_d, k)`, `α = 1 − D`, `β = D`.
/// 3. The head set keeps tokens with `P_v ≥ β · max P_v`.
/// 4. Head tokens score `(1 + α)·logits_v − α·logits_d`; all others `-inf`.
///
/// A head token the description side masks (`logits_d = -inf`) while `α > 0`
/// has an unbounded contrast. Such tokens take all of the mass, weighted by
/// `(1 + α)·logits_v` among themselves, which is the limit of the finite case.
pub fn code_step(
    logits_v: &LogitVector,
    logits_d: &LogitVector,
    k: f64,
) -> Result<ContrastStep, CoreError> {
    check_lengths(logits_v, logits_d)?;
    let p_v = softmax(logits_v, 1.0)?;
    let p_d = softmax(logits_d, 1.0)?;
    let Restriction {
        divergence,
        alpha,
        beta,
    } = restriction_params(&p_v, &p_d, k)?;
    let head_set = plausibility_head(&p_v, beta);
    assert!(
        !head_set.is_empty(),
        "argmax of P_v always clears the cutoff"
    );
    let mask = head_mask(logits_v.len(), &head_set);

    let (v, d) = (logits_v.as_slice(), logits_d.as_slice());
    let unbounded =
        alpha > 0.0 && (0..v.len()).any(|i| mask[i] && v[i].is_finite() && d[i] == NEG_INF);
    let contrast: Vec<f64> = (0..v.len())
        .map(|i| {
            if !mask[i] || !v[i].is_finite() {
                NEG_INF
            } else if alpha == 0.0 {
                v[i]
            } else if unbounded {
                if d[i] == NEG_INF {
                    (1.0 + alpha) * v[i]
                } else {
                    NEG_INF
                }
            } else {
                (1.0 + alpha) * v[i] - alpha * d[i]
            }
        })
        .collect();
    let distribution = softmax_slice(&contrast, 1.0)?;
    Ok(ContrastStep {
        distribution,
        contrasted_logits: LogitVector::from_vec_unchecked(contrast),
        head_set,
        divergence: Some(divergence),
        alpha_t: alpha,
        beta_t: beta,
    })
}

/// Per-step audit record of a decode.
///
/// For the contrastive strategies `logits_d` holds the description-side
/// logits. `divergence` is set only for the description-contrastive step,
/// where `alpha_t + beta_t = 1`. Single-stream strategies record
/// `alpha_t = beta_t = 0`, their own logits as `contrasted_logits` and the
/// candidate set they drew from as `head_set`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub logits_v: LogitVector,
    pub logits_d: Option<LogitVector>,
    pub divergence: Option<f64>,
    pub alpha_t: f64,
    pub beta_t: f64,
    pub head_set: Vec<TokenId>,
    pub contrasted_logits: LogitVector,
    pub chosen: TokenId,
}
