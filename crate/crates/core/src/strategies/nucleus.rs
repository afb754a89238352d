use rand::Rng;

use crate::types::{ProbDistribution, TokenId};

/// Smallest highest-probability prefix whose mass reaches `top_p`, most
/// probable first (ties by lower index). Zero-probability tokens are never
/// included.
pub fn nucleus_set(p: &ProbDistribution, top_p: f64) -> Vec<TokenId> {
    let probs = p.as_slice();
    let mut order: Vec<TokenId> = (0..probs.len() as TokenId)
        .filter(|&i| probs[i as usize] > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        probs[b as usize]
            .total_cmp(&probs[a as usize])
            .then(a.cmp(&b))
    });
    let mut mass = 0.0;
    for (cut, &id) in order.iter().enumerate() {
        mass += probs[id as usize];
        if mass >= top_p {
            order.truncate(cut + 1);
            break;
        }
    }
    order
}

/// Draws one token from `candidates` proportionally to `p`, renormalized
/// over the candidates.
pub fn sample_from<R: Rng + ?Sized>(
    p: &ProbDistribution,
    candidates: &[TokenId],
    rng: &mut R,
) -> TokenId {
    let probs = p.as_slice();
    let mass: f64 = candidates.iter().map(|&i| probs[i as usize]).sum();
    let target = rng.random::<f64>() * mass;
    let mut acc = 0.0;
    for &id in candidates {
        acc += probs[id as usize];
        if target < acc {
            return id;
        }
    }
    *candidates.last().expect("nonempty candidate set")
}

/// Nucleus (top-p) sampling with the caller's seeded generator.
pub fn nucleus_step<R: Rng + ?Sized>(p: &ProbDistribution, top_p: f64, rng: &mut R) -> TokenId {
    let set = nucleus_set(p, top_p);
    sample_from(p, &set, rng)
}
