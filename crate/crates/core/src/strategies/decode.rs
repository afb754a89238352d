//! The step loop shared by every strategy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::beam::beam_decode;
use super::contrast::{cd_fixed_step, code_step, StepRecord};
use super::nucleus::{nucleus_set, nucleus_step, sample_from};
use crate::config::{ConfigError, DecodeConfig, Selector, Strategy};
use crate::error::CoreError;
use crate::exec;
use crate::prob::{argmax_token, softmax};
use crate::providers::{LogitProvider, ProviderError};
use crate::types::{Context, ContextPair, LogitVector, TokenId};

/// Seedable generator used for every sampling decision: ChaCha with 8
/// rounds, seeded through `seed_from_u64`. Its output stream is fixed
/// across platforms.
pub type DecodeRng = ChaCha8Rng;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("strategy {0} needs a description-side provider")]
    MissingDescriptionProvider(Strategy),
    #[error("providers disagree on vocabulary size: {visual} vs {description}")]
    VocabMismatch { visual: usize, description: usize },
    #[error("invalid context: {0}")]
    InvalidContext(CoreError),
    #[error("provider failed at step {step}: {source}")]
    Provider {
        step: usize,
        #[source]
        source: ProviderError,
    },
    #[error("context overflow at step {step}: {len} tokens exceeds the provider maximum of {max}")]
    ContextOverflow { step: usize, len: usize, max: usize },
    #[error("numeric failure at step {step}: {source}")]
    Numeric {
        step: usize,
        #[source]
        source: CoreError,
    },
}

/// Provider calls issued by one decode, per side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub visual: u64,
    pub description: u64,
}

impl CallCounts {
    pub fn total(&self) -> u64 {
        self.visual + self.description
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Emitted tokens, including a final end-of-sequence token if one was chosen.
    pub tokens: Vec<TokenId>,
    /// One record per emitted token. Empty for beam search.
    pub trace: Vec<StepRecord>,
    pub calls: CallCounts,
}

pub(crate) fn check_overflow(
    provider: &dyn LogitProvider,
    ctx: &Context,
    step: usize,
) -> Result<(), DecodeError> {
    match provider.max_context() {
        Some(max) if ctx.len() > max => Err(DecodeError::ContextOverflow {
            step,
            len: ctx.len(),
            max,
        }),
        _ => Ok(()),
    }
}

fn select(
    contrasted: &LogitVector,
    config: &DecodeConfig,
    rng: &mut DecodeRng,
) -> Result<TokenId, CoreError> {
    match config.selector {
        Selector::Argmax => Ok(argmax_token(contrasted)),
        Selector::Sample => {
            let p = softmax(contrasted, config.temperature)?;
            Ok(nucleus_step(&p, config.top_p, rng))
        }
    }
}

/// Runs `config.strategy` until `max_tokens` tokens are emitted or the
/// vocabulary's end-of-sequence token is chosen.
///
/// `provider_v` is queried with the visual context at every step; the
/// contrastive strategies also query `provider_d` with the description
/// context. Each chosen token is appended to both contexts.
///
/// Greedy always takes the argmax and nucleus always samples; `selector`
/// applies to the contrastive strategies. Beam search decodes
/// `pair.visual` and records no step trace.
pub fn decode(
    provider_v: &dyn LogitProvider,
    provider_d: Option<&dyn LogitProvider>,
    mut pair: ContextPair,
    config: &DecodeConfig,
) -> Result<DecodeOutput, DecodeError> {
    config.validate()?;
    let n = provider_v.vocabulary().len();
    pair.validate(n).map_err(DecodeError::InvalidContext)?;
    let provider_d = if config.strategy.is_contrastive() {
        let d = provider_d.ok_or(DecodeError::MissingDescriptionProvider(config.strategy))?;
        if d.vocabulary().len() != n {
            return Err(DecodeError::VocabMismatch {
                visual: n,
                description: d.vocabulary().len(),
            });
        }
        Some(d)
    } else {
        None
    };

    if config.strategy == Strategy::Beam {
        let out = beam_decode(provider_v, &pair.visual, config)?;
        return Ok(DecodeOutput {
            tokens: out.best().token_ids.clone(),
            trace: Vec::new(),
            calls: out.calls,
        });
    }

    let eos = provider_v.vocabulary().eos_id();
    let mut rng = DecodeRng::seed_from_u64(config.rng_seed);
    let mut calls = CallCounts::default();
    let mut tokens = Vec::new();
    let mut trace = Vec::new();

    for step in 0..config.max_tokens {
        check_overflow(provider_v, &pair.visual, step)?;
        let logits_v = provider_v
            .next_logits(&pair.visual)
            .map_err(|source| DecodeError::Provider { step, source })?;
        calls.visual += 1;
        let numeric = |source| DecodeError::Numeric { step, source };

        let record = match (config.strategy, provider_d) {
            (Strategy::Greedy, _) => {
                let chosen = argmax_token(&logits_v);
                single_stream_record(step, logits_v, None, chosen)
            }
            (Strategy::Nucleus, _) => {
                let p = softmax(&logits_v, config.temperature).map_err(numeric)?;
                let set = nucleus_set(&p, config.top_p);
                let chosen = sample_from(&p, &set, &mut rng);
                single_stream_record(step, logits_v, Some(set), chosen)
            }
            (Strategy::CdFixed | Strategy::Code, Some(provider_d)) => {
                check_overflow(provider_d, &pair.description, step)?;
                let logits_d = provider_d
                    .next_logits(&pair.description)
                    .map_err(|source| DecodeError::Provider { step, source })?;
                calls.description += 1;
                let contrast = if config.strategy == Strategy::Code {
                    code_step(&logits_v, &logits_d, config.k)
                } else {
                    cd_fixed_step(&logits_v, &logits_d, config.alpha, config.beta)
                }
                .map_err(numeric)?;
                let chosen =
                    select(&contrast.contrasted_logits, config, &mut rng).map_err(numeric)?;
                contrast.into_record(step, logits_v, logits_d, chosen)
            }
            (Strategy::CdFixed | Strategy::Code | Strategy::Beam, _) => {
                unreachable!("handled before the loop")
            }
        };

        let chosen = record.chosen;
        tokens.push(chosen);
        trace.push(record);
        pair.push(chosen);
        if Some(chosen) == eos {
            break;
        }
    }
    Ok(DecodeOutput {
        tokens,
        trace,
        calls,
    })
}

fn single_stream_record(
    step: usize,
    logits_v: LogitVector,
    candidates: Option<Vec<TokenId>>,
    chosen: TokenId,
) -> StepRecord {
    let head_set = candidates.unwrap_or_else(|| {
        (0..logits_v.len() as TokenId)
            .filter(|&i| logits_v.as_slice()[i as usize].is_finite())
            .collect()
    });
    StepRecord {
        step,
        contrasted_logits: logits_v.clone(),
        logits_v,
        logits_d: None,
        divergence: None,
        alpha_t: 0.0,
        beta_t: 0.0,
        head_set,
        chosen,
    }
}

/// One independent decode for [`decode_batch`].
#[derive(Clone, Copy)]
pub struct DecodeJob<'a> {
    pub provider_v: &'a dyn LogitProvider,
    pub provider_d: Option<&'a dyn LogitProvider>,
    pub pair: &'a ContextPair,
    pub config: &'a DecodeConfig,
}

/// Runs independent decodes, concurrently when the `parallel` feature is
/// on. Results are in job order and identical to running each job alone.
pub fn decode_batch(jobs: &[DecodeJob<'_>]) -> Vec<Result<DecodeOutput, DecodeError>> {
    exec::batch(jobs, |job| {
        decode(job.provider_v, job.provider_d, job.pair.clone(), job.config)
    })
}
