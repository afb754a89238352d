//! Self-description of the visual context, at toy scale.
//!
//! The model is prompted with the scene followed by the description
//! instruction and decodes greedily; the result replaces the scene on the
//! description side of the [`ContextPair`](crate::types::ContextPair).

use super::{LogitProvider, ProviderError};
use crate::prob::argmax_token;
use crate::types::{Context, TokenId};

/// Instruction used to elicit a comprehensive description of an image.
pub const DESCRIPTION_PROMPT: &str = "Provide a detailed description of the image, covering all visible elements and their interactions, so as to thoroughly answer any potential questions about the image.";

/// Greedy decode of up to `max_len` tokens after `scene ++ prompt`.
/// Stops before the end-of-sequence token, which is not included.
pub fn describe_scene(
    provider: &dyn LogitProvider,
    scene: &[TokenId],
    prompt: &[TokenId],
    max_len: usize,
) -> Result<Vec<TokenId>, ProviderError> {
    let eos = provider.vocabulary().eos_id();
    let mut ctx = Context::new([scene, prompt].concat());
    let mut description = Vec::new();
    for _ in 0..max_len {
        let next = argmax_token(&provider.next_logits(&ctx)?);
        if Some(next) == eos {
            break;
        }
        description.push(next);
        ctx.push(next);
    }
    Ok(description)
}
