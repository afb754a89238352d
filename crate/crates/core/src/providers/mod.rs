//! Next-token logit sources behind one interface.
//!
//! Providers are deterministic: the same context always yields the same
//! logits. Sampling lives in the strategies.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::error::CoreError;
use crate::types::{Context, LogitVector, Vocabulary};

pub mod describe;
pub mod ngram;
pub mod protocol;
pub mod remote;
pub mod trace;

pub use describe::{describe_scene, DESCRIPTION_PROMPT};
pub use ngram::NGramModel;
pub use remote::{Endpoint, RemoteClient, RemoteProvider};
pub use trace::{Side, StepLogits, TraceFile, TraceHeader, TraceProvider};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("timed out after {0:?} waiting for a response")]
    Timeout(Duration),
    #[error("protocol version mismatch: expected {expected}, server says {detail}")]
    ProtocolVersion { expected: u32, detail: String },
    #[error("vocab mismatch: expected {expected} tokens, server reports {got}")]
    VocabMismatch { expected: usize, got: usize },
    #[error("malformed message: {0}")]
    Protocol(String),
    #[error("server error {code}: {message}")]
    Remote { code: i64, message: String },
    #[error("step {step} out of range for a trace of {len} steps")]
    StepOutOfRange { step: usize, len: usize },
    #[error("context of {len} tokens is shorter than the provider's {base}-token prefix")]
    ContextTooShort { len: usize, base: usize },
    #[error("logit vector has {got} entries, vocabulary has {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl ProviderError {
    /// Whether the failure is a wire-format/protocol problem rather than a
    /// transport or data problem.
    pub fn is_protocol(&self) -> bool {
        matches!(
            self,
            ProviderError::ProtocolVersion { .. }
                | ProviderError::VocabMismatch { .. }
                | ProviderError::WrongLength { .. }
                | ProviderError::Protocol(_)
                | ProviderError::Remote { .. }
        )
    }
}

/// A deterministic source of next-token logits.
pub trait LogitProvider: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Longest context the provider accepts, if bounded.
    fn max_context(&self) -> Option<usize> {
        None
    }

    /// Logits for the token following `ctx`. The result has exactly
    /// `vocabulary().len()` entries.
    fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError>;
}

impl<T: LogitProvider + ?Sized> LogitProvider for &T {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }
    fn max_context(&self) -> Option<usize> {
        (**self).max_context()
    }
    fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError> {
        (**self).next_logits(ctx)
    }
}

impl<T: LogitProvider + ?Sized> LogitProvider for Arc<T> {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }
    fn max_context(&self) -> Option<usize> {
        (**self).max_context()
    }
    fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError> {
        (**self).next_logits(ctx)
    }
}

impl<T: LogitProvider + ?Sized> LogitProvider for Box<T> {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }
    fn max_context(&self) -> Option<usize> {
        (**self).max_context()
    }
    fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError> {
        (**self).next_logits(ctx)
    }
}

/// Wraps a provider and records the number and wall time of its calls.
pub struct Instrumented<P> {
    inner: P,
    calls: AtomicU64,
    latencies: Mutex<Vec<Duration>>,
}

impl<P: LogitProvider> Instrumented<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
            latencies: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Wall time of every call so far, in call order.
    pub fn latencies(&self) -> Vec<Duration> {
        self.latencies.lock().expect("latency log poisoned").clone()
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
        self.latencies.lock().expect("latency log poisoned").clear();
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: LogitProvider> LogitProvider for Instrumented<P> {
    fn vocabulary(&self) -> &Vocabulary {
        self.inner.vocabulary()
    }

    fn max_context(&self) -> Option<usize> {
        self.inner.max_context()
    }

    fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError> {
        let start = Instant::now();
        let out = self.inner.next_logits(ctx);
        let elapsed = start.elapsed();
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.latencies
            .lock()
            .expect("latency log poisoned")
            .push(elapsed);
        out
    }
}

/// Checks a provider response against the vocabulary size.
pub(crate) fn check_length(logits: &LogitVector, n: usize) -> Result<(), ProviderError> {
    if logits.len() == n {
        Ok(())
    } else {
        Err(ProviderError::WrongLength {
            expected: n,
            got: logits.len(),
        })
    }
}
