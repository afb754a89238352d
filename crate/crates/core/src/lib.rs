//! Description-contrastive decoding engine.
//!
//! At every step the model is queried twice: once conditioned on the
//! visual context and once on its own self-generated description of it.
//! The bounded divergence between the two next-token distributions sets
//! both the contrast weight (`α = 1 − D`) and the candidate-pool cutoff
//! (`β = D`). See [`strategies::code_step`].
//!
//! Baselines (greedy, nucleus, beam, fixed-weight contrastive decoding) share
//! the same [`providers::LogitProvider`] interface and step trace.

pub mod config;
pub mod divergence;
pub mod error;
pub mod exec;
pub mod prob;
pub mod providers;
pub mod strategies;
pub mod types;

pub use config::{CdFixedParams, ConfigError, DecodeConfig, Selector, Strategy, Violation};
pub use divergence::{bounded_divergence, restriction_params, Restriction};
pub use error::CoreError;
pub use prob::{argmax_token, log_softmax, softmax};
pub use providers::{LogitProvider, ProviderError};
pub use strategies::{decode, DecodeError, DecodeOutput, StepRecord};
pub use types::{Context, ContextPair, LogitVector, ProbDistribution, TokenId, Vocabulary};
