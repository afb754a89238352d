//! Bounded divergence between two next-token distributions and the
//! contrast/constraint controls derived from it.
//!
//! ```text
//! D(P‖Q) = ½ Σᵢ (pᵢ + qᵢ) · log₂(|pᵢ − qᵢ|ᵏ + 1)
//! ```
//!
//! `D` is symmetric, lies in `[0, 1]`, and is zero exactly when `P = Q`.
//! The sum always runs over the whole vocabulary.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::exec;
use crate::types::ProbDistribution;

/// Relative size of softmax rounding noise, per unit of `p·(1 − p)`.
///
/// For `k < 1` the term `|p − q|ᵏ` has unbounded slope at zero, so rounding
/// noise from softmax would otherwise show up as divergence of order `1e-5`.
/// Rounding errors in the exponentials perturb a probability by roughly
/// `p·(1 − p)` times their relative size, which stays below this for logits
/// of ordinary magnitude.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Largest gap between `p` and `q` treated as rounding noise: the
/// exponential noise above plus a few ulps from the final division.
#[inline]
pub fn noise_gap(p: f64, q: f64) -> f64 {
    let m = p.max(q);
    m * (NOISE_FLOOR * (1.0 - m).max(0.0) + 4.0 * f64::EPSILON)
}

fn check_k(k: f64) -> Result<(), CoreError> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(CoreError::InvalidSmoothing(k))
    }
}

/// Contribution of one coordinate to the divergence sum, before halving.
#[inline]
pub fn divergence_term(p: f64, q: f64, k: f64) -> f64 {
    let gap = (p - q).abs();
    if gap <= noise_gap(p, q) {
        return 0.0;
    }
    let powered = (k * gap.ln()).exp();
    (p + q) * powered.ln_1p() / LN_2
}

/// Bounded divergence of `p` and `q` with smoothing exponent `k > 0`.
///
/// Smaller `k` makes the statistic more sensitive to small probability
/// gaps; `k ≥ 1` flattens it.
pub fn bounded_divergence(
    p: &ProbDistribution,
    q: &ProbDistribution,
    k: f64,
) -> Result<f64, CoreError> {
    check_k(k)?;
    if p.len() != q.len() {
        return Err(CoreError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let (p, q) = (p.as_slice(), q.as_slice());
    let total = exec::sum_by(p.len(), |i| divergence_term(p[i], q[i], k));
    // Only absorbs floating drift at the bounds.
    Ok((0.5 * total).clamp(0.0, 1.0))
}

/// Per-step contrast strength and candidate-pool cutoff derived from one
/// divergence value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Restriction {
    pub divergence: f64,
    /// `1 − D`: how strongly the visual/description gap is amplified.
    pub alpha: f64,
    /// `D`: relative probability cutoff for the candidate pool.
    pub beta: f64,
}

impl Restriction {
    pub fn from_divergence(divergence: f64) -> Self {
        Self {
            divergence,
            alpha: 1.0 - divergence,
            beta: divergence,
        }
    }
}

/// `(α, β) = (1 − D, D)` for the visual and description distributions.
pub fn restriction_params(
    p_visual: &ProbDistribution,
    p_description: &ProbDistribution,
    k: f64,
) -> Result<Restriction, CoreError> {
    bounded_divergence(p_visual, p_description, k).map(Restriction::from_divergence)
}
