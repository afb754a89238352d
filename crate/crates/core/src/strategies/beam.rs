use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::decode::{check_overflow, CallCounts, DecodeError};
use crate::config::DecodeConfig;
use crate::prob::log_softmax;
use crate::providers::LogitProvider;
use crate::types::{Context, TokenId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    pub token_ids: Vec<TokenId>,
    /// Sum of the per-step log-probabilities of `token_ids`.
    pub cum_logprob: f64,
    /// Ended with the end-of-sequence token; frozen from then on.
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutput {
    /// Final hypotheses, best first.
    pub hypotheses: Vec<BeamHypothesis>,
    pub calls: CallCounts,
}

impl BeamOutput {
    pub fn best(&self) -> &BeamHypothesis {
        &self.hypotheses[0]
    }
}

struct Candidate {
    score: f64,
    parent: usize,
    token: Option<TokenId>,
}

/// Best first; ties by parent beam, then frozen before extended, then token.
fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.parent.cmp(&b.parent))
        .then(a.token.cmp(&b.token))
}

/// Length-`max_tokens` beam search over per-step log-probabilities, with
/// `num_beams` hypotheses kept per step. Finished hypotheses keep competing
/// on their frozen cumulative log-probability. No length normalization.
pub fn beam_decode(
    provider: &dyn LogitProvider,
    ctx: &Context,
    config: &DecodeConfig,
) -> Result<BeamOutput, DecodeError> {
    config.validate().map_err(DecodeError::Config)?;
    ctx.validate(provider.vocabulary().len())
        .map_err(DecodeError::InvalidContext)?;
    let width = config.num_beams;
    let eos = provider.vocabulary().eos_id();
    let mut calls = CallCounts::default();
    let mut beams = vec![BeamHypothesis {
        token_ids: Vec::new(),
        cum_logprob: 0.0,
        finished: false,
    }];

    for step in 0..config.max_tokens {
        if beams.iter().all(|b| b.finished) {
            break;
        }
        let mut candidates = Vec::new();
        for (parent, hyp) in beams.iter().enumerate() {
            if hyp.finished {
                candidates.push(Candidate {
                    score: hyp.cum_logprob,
                    parent,
                    token: None,
                });
                continue;
            }
            let mut full = ctx.clone();
            hyp.token_ids.iter().for_each(|&t| full.push(t));
            check_overflow(provider, &full, step)?;
            let logits = provider
                .next_logits(&full)
                .map_err(|source| DecodeError::Provider { step, source })?;
            calls.visual += 1;
            let logprobs = log_softmax(&logits, 1.0)
                .map_err(|source| DecodeError::Numeric { step, source })?;
            let mut expansions: Vec<Candidate> = logprobs
                .iter()
                .enumerate()
                .filter(|(_, lp)| lp.is_finite())
                .map(|(tok, lp)| Candidate {
                    score: hyp.cum_logprob + lp,
                    parent,
                    token: Some(tok as TokenId),
                })
                .collect();
            // Only the best `width` expansions of one parent can survive.
            if expansions.len() > width {
                expansions.select_nth_unstable_by(width - 1, rank);
                expansions.truncate(width);
            }
            candidates.extend(expansions);
        }
        candidates.sort_by(rank);
        candidates.truncate(width);
        beams = candidates
            .into_iter()
            .map(|c| {
                let parent = &beams[c.parent];
                match c.token {
                    None => parent.clone(),
                    Some(tok) => {
                        let mut token_ids = parent.token_ids.clone();
                        token_ids.push(tok);
                        BeamHypothesis {
                            token_ids,
                            cum_logprob: c.score,
                            finished: Some(tok) == eos,
                        }
                    }
                }
            })
            .collect();
    }
    Ok(BeamOutput {
        hypotheses: beams,
        calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Strategy;
    use crate::providers::ProviderError;
    use crate::types::{LogitVector, Vocabulary};

    /// Logits depend only on the previous token (or the step for the first).
    struct Table {
        vocab: Vocabulary,
        first: Vec<f64>,
        after: Vec<Vec<f64>>,
    }

    impl LogitProvider for Table {
        fn vocabulary(&self) -> &Vocabulary {
            &self.vocab
        }
        fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError> {
            let row = match ctx.token_ids().last() {
                None => self.first.clone(),
                Some(&t) => self.after[t as usize].clone(),
            };
            Ok(LogitVector::new(row)?)
        }
    }

    fn cfg(beams: usize, t: usize) -> DecodeConfig {
        DecodeConfig {
            num_beams: beams,
            max_tokens: t,
            ..DecodeConfig::with_strategy(Strategy::Beam)
        }
    }

    fn trap() -> Table {
        // Greedy takes token 0 first, but 0 leads to a flat distribution
        // while 1 leads to a confident one.
        Table {
            vocab: Vocabulary::opaque(3, None).unwrap(),
            first: vec![1.0, 0.9, -2.0],
            after: vec![
                vec![0.0, 0.0, 0.0],
                vec![0.0, 6.0, 0.0],
                vec![0.0, 0.0, 0.0],
            ],
        }
    }

    fn exhaustive_best(t: &Table) -> (Vec<TokenId>, f64) {
        let lp = |v: &[f64]| log_softmax(&LogitVector::new(v.to_vec()).unwrap(), 1.0).unwrap();
        let first = lp(&t.first);
        let mut best = (vec![], f64::NEG_INFINITY);
        for (a, (&fa, after)) in first.iter().zip(&t.after).enumerate() {
            for (b, &sb) in lp(after).iter().enumerate() {
                let s = fa + sb;
                if s > best.1 {
                    best = (vec![a as TokenId, b as TokenId], s);
                }
            }
        }
        best
    }

    #[test]
    fn wide_beam_matches_enumeration() {
        let t = trap();
        let (path, score) = exhaustive_best(&t);
        let out = beam_decode(&t, &Context::default(), &cfg(3, 2)).unwrap();
        assert_eq!(out.best().token_ids, path);
        assert!((out.best().cum_logprob - score).abs() < 1e-12);
        assert_eq!(path, vec![1, 1]);
    }

    #[test]
    fn single_beam_is_greedy() {
        let out = beam_decode(&trap(), &Context::default(), &cfg(1, 2)).unwrap();
        assert_eq!(out.best().token_ids, vec![0, 0]);
        assert_eq!(out.calls.visual, 2);
    }

    #[test]
    fn finished_hypotheses_are_frozen() {
        // Token 2 is eos; ending immediately is very likely.
        let t = Table {
            vocab: Vocabulary::opaque(3, Some(2)).unwrap(),
            first: vec![0.0, 0.0, 3.0],
            after: vec![vec![5.0, 0.0, 0.0]; 3],
        };
        let out = beam_decode(&t, &Context::default(), &cfg(2, 4)).unwrap();
        let best = out.best();
        assert_eq!(best.token_ids, vec![2]);
        assert!(best.finished);
        // The frozen hypothesis never grows.
        assert!(out
            .hypotheses
            .iter()
            .filter(|h| h.finished)
            .all(|h| h.token_ids == vec![2]));
        assert!(out
            .hypotheses
            .windows(2)
            .all(|w| w[0].cum_logprob >= w[1].cum_logprob));
    }

    #[test]
    fn cumulative_logprob_is_sum_of_steps() {
        let t = trap();
        let out = beam_decode(&t, &Context::default(), &cfg(2, 2)).unwrap();
        for h in &out.hypotheses {
            let mut ctx = Context::default();
            let mut sum = 0.0;
            for &tok in &h.token_ids {
                let lp = log_softmax(&t.next_logits(&ctx).unwrap(), 1.0).unwrap();
                sum += lp[tok as usize];
                ctx.push(tok);
            }
            assert!((sum - h.cum_logprob).abs() < 1e-12);
        }
    }
}
