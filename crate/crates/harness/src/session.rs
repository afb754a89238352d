//! Provider construction from resolved settings.

use std::sync::Arc;
use std::time::{Duration, Instant};

use code_core::providers::ngram::Corpus;
use code_core::providers::remote::{Endpoint, RemoteClient, RemoteProvider};
use code_core::providers::{describe_scene, Side, TraceFile, TraceProvider, DESCRIPTION_PROMPT};
use code_core::{Context, ContextPair, DecodeConfig, LogitProvider, TokenId, Vocabulary};

use crate::config::{ProviderKind, Settings};
use crate::error::HarnessError;

/// Providers and contexts for one run.
pub struct Session {
    pub vocab: Vocabulary,
    pub visual: Box<dyn LogitProvider>,
    pub description: Option<Box<dyn LogitProvider>>,
    pub pair: ContextPair,
    /// The description text, when one was supplied or generated.
    pub description_text: Option<String>,
    /// Time spent producing the description, outside of any decode.
    pub description_time: Duration,
    /// Steps available to replay, for trace providers.
    pub max_steps: Option<usize>,
}

fn read(path: &std::path::Path, what: &str) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        context: format!("{what} {}", path.display()),
        source,
    })
}

fn encode(vocab: &Vocabulary, text: &str, field: &str) -> Result<Vec<TokenId>, HarnessError> {
    vocab
        .encode(text)
        .map_err(|e| HarnessError::Config(vec![format!("{field}: {e}")]))
}

impl Session {
    /// Validates `settings` and connects or loads the provider.
    pub fn open(settings: &Settings) -> Result<Self, HarnessError> {
        settings.validate()?;
        match settings.provider {
            ProviderKind::Ngram => Self::ngram(settings),
            ProviderKind::Trace => Self::trace(settings),
            ProviderKind::Remote => Self::remote(settings),
        }
    }

    fn ngram(settings: &Settings) -> Result<Self, HarnessError> {
        let path = settings.corpus.as_deref().expect("validated");
        let corpus = Corpus::from_text(&read(path, "corpus")?, true)
            .map_err(|e| HarnessError::Config(vec![format!("corpus {}: {e}", path.display())]))?;
        let model = Arc::new(
            corpus
                .train(settings.order, settings.lambda)
                .map_err(|e| HarnessError::Config(vec![e.to_string()]))?,
        );
        let vocab = corpus.vocab;
        let prompt = encode(&vocab, &settings.prompt, "prompt")?;
        let scene = match &settings.scene {
            Some(s) => encode(&vocab, s, "scene")?,
            None => Vec::new(),
        };
        let visual = Context::new([scene.as_slice(), &prompt].concat());

        let start = Instant::now();
        let description = match (&settings.description, &settings.scene) {
            (Some(text), _) => Some(encode(&vocab, text, "description")?),
            // An n-gram model cannot follow an instruction, so it simply
            // continues the scene.
            (None, Some(_)) => Some(describe_scene(&*model, &scene, &[], settings.describe_len)?),
            (None, None) => None,
        };
        let description_time = start.elapsed();

        let (pair, description_text, d_side) = match description {
            Some(ids) => {
                let text = vocab.decode(&ids);
                let ctx = Context::new([ids.as_slice(), &prompt].concat());
                let d: Box<dyn LogitProvider> = Box::new(model.clone());
                (ContextPair::new(visual, ctx), Some(text), Some(d))
            }
            None => (ContextPair::shared(visual), None, None),
        };
        Ok(Self {
            vocab,
            visual: Box::new(model),
            description: d_side,
            pair,
            description_text,
            description_time,
            max_steps: None,
        })
    }

    fn trace(settings: &Settings) -> Result<Self, HarnessError> {
        let path = settings.trace_file.as_deref().expect("validated");
        let trace = TraceFile::from_json(&read(path, "trace file")?)?;
        let steps = trace.len();
        let vocab = trace.vocabulary()?;
        let (v, d) = TraceProvider::pair(trace)?;
        Ok(Self {
            vocab,
            visual: Box::new(v),
            description: Some(Box::new(d)),
            pair: ContextPair::shared(Context::new(Vec::new())),
            description_text: None,
            description_time: Duration::ZERO,
            max_steps: Some(steps),
        })
    }

    fn remote(settings: &Settings) -> Result<Self, HarnessError> {
        let endpoint: Endpoint = settings
            .endpoint
            .as_deref()
            .expect("validated")
            .parse()
            .map_err(|e: String| HarnessError::Config(vec![format!("endpoint: {e}")]))?;
        let timeout = Duration::from_millis(settings.timeout_ms);
        let client = Arc::new(RemoteClient::connect(&endpoint, timeout, None)?);
        let prompt = if settings.prompt.is_empty() {
            Vec::new()
        } else {
            client.tokenize(&settings.prompt)?
        };
        let start = Instant::now();
        let description_text = match &settings.image {
            Some(image) => Some(client.describe(image, DESCRIPTION_PROMPT)?),
            None => None,
        };
        let description_time = start.elapsed();
        Ok(Self {
            vocab: client.vocabulary().clone(),
            visual: Box::new(RemoteProvider::new(client.clone(), Side::Visual)),
            description: Some(Box::new(RemoteProvider::new(client, Side::Description))),
            pair: ContextPair::shared(Context::new(prompt)),
            description_text,
            description_time,
            max_steps: None,
        })
    }

    /// `config` with `max_tokens` capped at the replayable length.
    pub fn fit(&self, config: &DecodeConfig) -> DecodeConfig {
        let mut c = config.clone();
        if let Some(steps) = self.max_steps {
            c.max_tokens = c.max_tokens.min(steps.max(1));
        }
        c
    }

    pub fn description_provider(&self) -> Option<&dyn LogitProvider> {
        self.description.as_deref()
    }
}
