//! Additively smoothed n-gram model with backoff to shorter contexts.
//!
//! For the longest observed context `h` (at most `order − 1` tokens) ending
//! the query, the logit of token `w` is
//! `ln((count(h, w) + λ) / (count(h, ·) + λ·n))`. Contexts never seen in
//! training back off one token at a time down to the unigram table.

use std::collections::HashMap;

use thiserror::Error;

use super::{LogitProvider, ProviderError};
use crate::error::CoreError;
use crate::types::{Context, LogitVector, TokenId, Vocabulary};

pub const EOS_TOKEN: &str = "<eos>";

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training corpus has no tokens")]
    EmptyCorpus,
    #[error("n-gram order must be >= 1")]
    InvalidOrder,
    #[error("smoothing lambda must be finite and > 0, got {0}")]
    InvalidLambda(f64),
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    counts: HashMap<TokenId, u64>,
}

#[derive(Debug, Clone)]
pub struct NGramModel {
    vocab: Vocabulary,
    order: usize,
    lambda: f64,
    tables: HashMap<Vec<TokenId>, ContextCounts>,
}

impl NGramModel {
    /// Counts every `(h, w)` pair with `|h| < order` over the corpus.
    pub fn train(
        corpus: &[Vec<TokenId>],
        vocab: Vocabulary,
        order: usize,
        lambda: f64,
    ) -> Result<Self, TrainError> {
        if order == 0 {
            return Err(TrainError::InvalidOrder);
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(TrainError::InvalidLambda(lambda));
        }
        if corpus.iter().all(Vec::is_empty) {
            return Err(TrainError::EmptyCorpus);
        }
        let n = vocab.len();
        let mut tables: HashMap<Vec<TokenId>, ContextCounts> = HashMap::new();
        for seq in corpus {
            Context::new(seq.clone()).validate(n)?;
            for (i, &w) in seq.iter().enumerate() {
                for h_len in 0..order.min(i + 1) {
                    let entry = tables.entry(seq[i - h_len..i].to_vec()).or_default();
                    entry.total += 1;
                    *entry.counts.entry(w).or_default() += 1;
                }
            }
        }
        Ok(Self {
            vocab,
            order,
            lambda,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The longest suffix of `ctx` with training counts.
    fn backoff<'a>(&'a self, ctx: &[TokenId]) -> &'a ContextCounts {
        let longest = (self.order - 1).min(ctx.len());
        (0..=longest)
            .rev()
            .find_map(|h_len| self.tables.get(&ctx[ctx.len() - h_len..]))
            .expect("unigram table exists for a nonempty corpus")
    }

    pub fn logits(&self, ctx: &[TokenId]) -> LogitVector {
        let table = self.backoff(ctx);
        let n = self.vocab.len();
        let log_denominator = (table.total as f64 + self.lambda * n as f64).ln();
        let scores = (0..n as TokenId)
            .map(|w| {
                let c = table.counts.get(&w).copied().unwrap_or(0) as f64;
                (c + self.lambda).ln() - log_denominator
            })
            .collect();
        LogitVector::from_vec_unchecked(scores)
    }
}

impl LogitProvider for NGramModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError> {
        ctx.validate(self.vocab.len())?;
        Ok(self.logits(ctx.token_ids()))
    }
}

/// Whitespace-tokenized training text: one sequence per nonblank line.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub sequences: Vec<Vec<TokenId>>,
}

impl Corpus {
    /// Builds the vocabulary in order of first appearance. With `with_eos`,
    /// [`EOS_TOKEN`] takes id 0 and terminates every line.
    pub fn from_text(text: &str, with_eos: bool) -> Result<Self, TrainError> {
        let mut tokens: Vec<String> = Vec::new();
        let mut ids: HashMap<String, TokenId> = HashMap::new();
        if with_eos {
            tokens.push(EOS_TOKEN.to_string());
            ids.insert(EOS_TOKEN.to_string(), 0);
        }
        let mut sequences = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut seq: Vec<TokenId> = line
                .split_whitespace()
                .map(|w| {
                    *ids.entry(w.to_string()).or_insert_with(|| {
                        tokens.push(w.to_string());
                        (tokens.len() - 1) as TokenId
                    })
                })
                .collect();
            if with_eos {
                seq.push(0);
            }
            sequences.push(seq);
        }
        if tokens.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        let vocab = Vocabulary::new(tokens, with_eos.then_some(0))?;
        Ok(Self { vocab, sequences })
    }

    pub fn train(&self, order: usize, lambda: f64) -> Result<NGramModel, TrainError> {
        NGramModel::train(&self.sequences, self.vocab.clone(), order, lambda)
    }
}
