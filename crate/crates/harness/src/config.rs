//! Run settings, layered as command-line flags over a TOML file over
//! built-in defaults, one field at a time.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use code_core::{DecodeConfig, Selector, Strategy, Violation};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Toy n-gram model trained on a text corpus.
    #[default]
    Ngram,
    /// Replay of a recorded trace file.
    Trace,
    /// Model server over the newline-delimited JSON protocol.
    Remote,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Ngram => "ngram",
            ProviderKind::Trace => "trace",
            ProviderKind::Remote => "remote",
        })
    }
}

/// One source of settings. Every field is optional so that layers can be
/// stacked; the file form rejects unknown keys.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// Decoding strategy: greedy, nucleus, beam, cd_fixed or code.
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Contrast weight for cd_fixed.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Plausibility cutoff for cd_fixed.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Smoothing exponent of the divergence used by code.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub num_beams: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long = "seed")]
    pub rng_seed: Option<u64>,
    /// Token selection for the contrastive strategies: argmax or sample.
    #[arg(long)]
    pub selector: Option<Selector>,

    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    /// Training text for the n-gram provider, one sequence per line.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// n-gram order.
    #[arg(long)]
    pub order: Option<usize>,
    /// Additive smoothing for the n-gram provider.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Text that starts the decode.
    #[arg(long)]
    pub prompt: Option<String>,
    /// Visual context for the n-gram provider, as corpus words.
    #[arg(long)]
    pub scene: Option<String>,
    /// Description context for the n-gram provider. Generated from the
    /// scene when absent.
    #[arg(long)]
    pub description: Option<String>,
    /// Longest generated description, in tokens.
    #[arg(long)]
    pub describe_len: Option<usize>,
    #[arg(long)]
    pub trace_file: Option<PathBuf>,
    /// Model server address: tcp://host:port or stdio:<command>.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Image handed to the server's describe method.
    #[arg(long)]
    pub image: Option<String>,
    /// Per-request timeout for the model server.
    #[arg(long)]
    pub timeout_ms: Option<u64>,
}

macro_rules! overlay {
    ($top:expr, $bottom:expr; $($field:ident),* $(,)?) => {
        Layer { $($field: $top.$field.clone().or_else(|| $bottom.$field.clone())),* }
    };
}

impl Layer {
    /// Parses a TOML settings file.
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text)
            .map_err(|e| HarnessError::Config(vec![format!("config file: {}", e.message())]))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(vec![format!("config file {}: {e}", path.display())])
        })?;
        Self::from_toml(&text)
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(&self, lower: &Layer) -> Layer {
        overlay!(self, lower;
            strategy, alpha, beta, k, top_p, temperature, num_beams, max_tokens,
            rng_seed, selector, provider, corpus, order, lambda, prompt, scene,
            description, describe_len, trace_file, endpoint, image, timeout_ms,
        )
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub decode: DecodeConfig,
    pub provider: ProviderKind,
    pub corpus: Option<PathBuf>,
    pub order: usize,
    pub lambda: f64,
    pub prompt: String,
    pub scene: Option<String>,
    pub description: Option<String>,
    pub describe_len: usize,
    pub trace_file: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub image: Option<String>,
    pub timeout_ms: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self::resolve(&Layer::default())
    }
}

impl Settings {
    /// Fills every field left open by `layer` with its default.
    pub fn resolve(layer: &Layer) -> Self {
        let d = DecodeConfig::default();
        Self {
            decode: DecodeConfig {
                strategy: layer.strategy.unwrap_or(d.strategy),
                alpha: layer.alpha.unwrap_or(d.alpha),
                beta: layer.beta.unwrap_or(d.beta),
                k: layer.k.unwrap_or(d.k),
                top_p: layer.top_p.unwrap_or(d.top_p),
                temperature: layer.temperature.unwrap_or(d.temperature),
                num_beams: layer.num_beams.unwrap_or(d.num_beams),
                max_tokens: layer.max_tokens.unwrap_or(d.max_tokens),
                rng_seed: layer.rng_seed.unwrap_or(d.rng_seed),
                selector: layer.selector.unwrap_or(d.selector),
            },
            provider: layer.provider.unwrap_or_default(),
            corpus: layer.corpus.clone(),
            order: layer.order.unwrap_or(3),
            lambda: layer.lambda.unwrap_or(0.1),
            prompt: layer.prompt.clone().unwrap_or_default(),
            scene: layer.scene.clone(),
            description: layer.description.clone(),
            describe_len: layer.describe_len.unwrap_or(16),
            trace_file: layer.trace_file.clone(),
            endpoint: layer.endpoint.clone(),
            image: layer.image.clone(),
            timeout_ms: layer.timeout_ms.unwrap_or(60_000),
        }
    }

    /// Flags over the optional file over defaults.
    pub fn from_sources(flags: &Layer, file: Option<&Path>) -> Result<Self, HarnessError> {
        let file = match file {
            Some(path) => Layer::load(path)?,
            None => Layer::default(),
        };
        Ok(Self::resolve(&flags.over(&file)))
    }

    /// Whether the configured provider can serve the description side.
    pub fn has_description_side(&self) -> bool {
        match self.provider {
            ProviderKind::Ngram => self.scene.is_some() || self.description.is_some(),
            ProviderKind::Trace | ProviderKind::Remote => true,
        }
    }

    /// Every problem with the settings, decode parameters included.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = self.decode.violations();
        let mut need = |ok: bool, field: &'static str, message: &str| {
            if !ok {
                out.push(Violation {
                    field,
                    message: message.to_string(),
                });
            }
        };
        match self.provider {
            ProviderKind::Ngram => {
                need(
                    self.corpus.is_some(),
                    "corpus",
                    "the ngram provider needs --corpus",
                );
                need(self.order >= 1, "order", "must be >= 1");
                need(
                    self.lambda.is_finite() && self.lambda > 0.0,
                    "lambda",
                    "must be finite and > 0",
                );
            }
            ProviderKind::Trace => {
                need(
                    self.trace_file.is_some(),
                    "trace_file",
                    "the trace provider needs --trace-file",
                );
            }
            ProviderKind::Remote => {
                need(
                    self.endpoint.is_some(),
                    "endpoint",
                    "the remote provider needs --endpoint",
                );
                need(self.timeout_ms > 0, "timeout_ms", "must be > 0");
            }
        }
        need(
            !self.decode.strategy.is_contrastive() || self.has_description_side(),
            "strategy",
            &format!(
                "{} needs a description-side provider; pass --scene or --description",
                self.decode.strategy
            ),
        );
        out
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(
                v.iter().map(ToString::to_string).collect(),
            ))
        }
    }
}
