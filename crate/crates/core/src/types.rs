//! Value types shared by every strategy and provider.
//!
//! All of them are plain owned data: cheap to clone, `Send + Sync`, and
//! validated on construction so downstream code can rely on their invariants.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Dense token index into a [`Vocabulary`].
pub type TokenId = u32;

/// Tolerance on the total mass of a [`ProbDistribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Ordered token strings with a bijective string/index mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    eos_id: Option<TokenId>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, eos_id: Option<TokenId>) -> Result<Self, CoreError> {
        if tokens.is_empty() {
            return Err(CoreError::Empty);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as TokenId).is_some() {
                return Err(CoreError::DuplicateToken(tok.clone()));
            }
        }
        if let Some(eos) = eos_id {
            if eos as usize >= tokens.len() {
                return Err(CoreError::TokenOutOfRange {
                    id: eos,
                    n: tokens.len(),
                });
            }
        }
        Ok(Self {
            tokens,
            index,
            eos_id,
        })
    }

    /// Vocabulary whose token strings are unknown (e.g. a remote model that
    /// only reports its size). Tokens render as `<id>`.
    pub fn opaque(n: usize, eos_id: Option<TokenId>) -> Result<Self, CoreError> {
        Self::new((0..n).map(|i| format!("<{i}>")).collect(), eos_id)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos_id(&self) -> Option<TokenId> {
        self.eos_id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// Whitespace tokenization; every word must be in the vocabulary.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>, CoreError> {
        text.split_whitespace()
            .map(|w| {
                self.id(w)
                    .ok_or_else(|| CoreError::UnknownToken(w.to_string()))
            })
            .collect()
    }

    /// Whitespace tokenization that drops out-of-vocabulary words.
    pub fn encode_lenient(&self, text: &str) -> Vec<TokenId> {
        text.split_whitespace().filter_map(|w| self.id(w)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or("<?>"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Raw next-token scores. Entries are finite or `-inf` (masked); at least
/// one entry is finite.
///
/// Serializes as an array of numbers with masked entries written as the
/// string `"-inf"`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(scores: Vec<f64>) -> Result<Self, CoreError> {
        if scores.is_empty() {
            return Err(CoreError::Empty);
        }
        let mut any_finite = false;
        for (index, &value) in scores.iter().enumerate() {
            if value.is_nan() || value == f64::INFINITY {
                return Err(CoreError::InvalidLogit { index, value });
            }
            any_finite |= value.is_finite();
        }
        if !any_finite {
            return Err(CoreError::EmptySupport);
        }
        Ok(Self(scores))
    }

    pub(crate) fn from_vec_unchecked(scores: Vec<f64>) -> Self {
        debug_assert!(Self::new(scores.clone()).is_ok());
        Self(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: TokenId) -> Option<f64> {
        self.0.get(id as usize).copied()
    }

    /// Indices of the `j` highest scores, highest first, ties by lower index.
    pub fn top(&self, j: usize) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.0.len() as TokenId).collect();
        ids.sort_by(|&a, &b| {
            self.0[b as usize]
                .total_cmp(&self.0[a as usize])
                .then(a.cmp(&b))
        });
        ids.truncate(j);
        ids
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = CoreError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<LogitVector> for Vec<f64> {
    fn from(v: LogitVector) -> Self {
        v.0
    }
}

/// Wire form of one logit: a number, or `"-inf"` for a masked entry.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LogitRepr {
    Finite(f64),
    Masked(String),
}

pub const NEG_INF_TOKEN: &str = "-inf";

impl Serialize for LogitVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for &x in &self.0 {
            if x == f64::NEG_INFINITY {
                seq.serialize_element(NEG_INF_TOKEN)?;
            } else {
                seq.serialize_element(&x)?;
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for LogitVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = Vec::<LogitRepr>::deserialize(deserializer)?;
        let scores = raw
            .into_iter()
            .map(|r| match r {
                LogitRepr::Finite(x) => Ok(x),
                LogitRepr::Masked(s) if s == NEG_INF_TOKEN => Ok(f64::NEG_INFINITY),
                LogitRepr::Masked(s) => Err(D::Error::custom(format!(
                    "expected a number or \"{NEG_INF_TOKEN}\", got {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        LogitVector::new(scores).map_err(D::Error::custom)
    }
}

impl AsRef<[f64]> for LogitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Normalized probabilities over a vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbDistribution(Vec<f64>);

impl ProbDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, CoreError> {
        if probs.is_empty() {
            return Err(CoreError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CoreError::InvalidProbability { index, value });
            }
        }
        let total = crate::exec::sum(&probs);
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(CoreError::NotNormalized(total));
        }
        Ok(Self(probs))
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    /// Point mass on `id` over `n` tokens.
    pub fn one_hot(n: usize, id: TokenId) -> Result<Self, CoreError> {
        if id as usize >= n {
            return Err(CoreError::TokenOutOfRange { id, n });
        }
        let mut probs = vec![0.0; n];
        probs[id as usize] = 1.0;
        Ok(Self(probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: TokenId) -> Option<f64> {
        self.0.get(id as usize).copied()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for ProbDistribution {
    type Error = CoreError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ProbDistribution> for Vec<f64> {
    fn from(v: ProbDistribution) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for ProbDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Conditioning prefix: query tokens followed by the generated prefix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(Vec<TokenId>);

impl Context {
    pub fn new(token_ids: Vec<TokenId>) -> Self {
        Self(token_ids)
    }

    /// Checks every index against a vocabulary size.
    pub fn validate(&self, n: usize) -> Result<(), CoreError> {
        match self.0.iter().find(|&&id| id as usize >= n) {
            Some(&id) => Err(CoreError::TokenOutOfRange { id, n }),
            None => Ok(()),
        }
    }

    pub fn token_ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, id: TokenId) {
        self.0.push(id);
    }
}

impl From<Vec<TokenId>> for Context {
    fn from(v: Vec<TokenId>) -> Self {
        Self(v)
    }
}

/// The visual-conditioned and description-conditioned prefixes decoded in
/// lockstep. Generated tokens extend both sides identically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPair {
    pub visual: Context,
    pub description: Context,
}

impl ContextPair {
    pub fn new(visual: Context, description: Context) -> Self {
        Self {
            visual,
            description,
        }
    }

    /// Both sides share one prefix (single-stream decodes, trace replay).
    pub fn shared(ctx: Context) -> Self {
        Self {
            visual: ctx.clone(),
            description: ctx,
        }
    }

    pub fn push(&mut self, id: TokenId) {
        self.visual.push(id);
        self.description.push(id);
    }

    pub fn validate(&self, n: usize) -> Result<(), CoreError> {
        self.visual.validate(n)?;
        self.description.validate(n)
    }
}
