use code_core::providers::trace::TraceError;
use code_core::{DecodeError, ProviderError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_PROTOCOL: i32 = 4;

fn provider_code(e: &ProviderError) -> i32 {
    if e.is_protocol() {
        EXIT_PROTOCOL
    } else {
        EXIT_PROVIDER
    }
}

impl HarnessError {
    /// Process exit status: 2 for configuration and usage errors, 3 for
    /// provider and transport failures, 4 for protocol violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Usage(_) => EXIT_CONFIG,
            HarnessError::Provider(e) => provider_code(e),
            HarnessError::Decode(e) => match e {
                DecodeError::Config(_)
                | DecodeError::MissingDescriptionProvider(_)
                | DecodeError::InvalidContext(_) => EXIT_CONFIG,
                DecodeError::Provider { source, .. } => provider_code(source),
                DecodeError::VocabMismatch { .. } => EXIT_PROTOCOL,
                DecodeError::ContextOverflow { .. } | DecodeError::Numeric { .. } => EXIT_PROVIDER,
            },
            HarnessError::Trace(_) | HarnessError::Io { .. } => EXIT_PROVIDER,
        }
    }
}
