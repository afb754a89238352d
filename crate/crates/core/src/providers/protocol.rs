//! Newline-delimited JSON messages exchanged with a model server.
//!
//! Every request is one line `{"id":..,"method":..,"params":{..}}`; every
//! response is one line carrying the same id and either `result` or
//! `error: {code, message}`. One request is in flight per connection.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::trace::Side;
use crate::types::{LogitVector, TokenId};

pub const PROTOCOL_VERSION: u32 = 1;

/// Error codes used by the reference server.
pub mod codes {
    pub const PARSE_ERROR: i64 = -32700;
    pub const METHOD_NOT_FOUND: i64 = -32601;
    pub const INVALID_PARAMS: i64 = -32602;
    pub const UNSUPPORTED_VERSION: i64 = 1;
    pub const DESCRIPTION_NOT_GENERATED: i64 = 2;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "params", rename_all = "snake_case")]
pub enum Call {
    Handshake { format_version: u32 },
    Logits { side: Side, context: Vec<TokenId> },
    Tokenize { text: String },
    Describe { image: String, prompt: String },
}

impl Call {
    pub fn method(&self) -> &'static str {
        match self {
            Call::Handshake { .. } => "handshake",
            Call::Logits { .. } => "logits",
            Call::Tokenize { .. } => "tokenize",
            Call::Describe { .. } => "describe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub call: Call,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcError {
    pub code: i64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RpcError>,
}

impl Response {
    pub fn ok(id: u64, result: impl Serialize) -> Self {
        Self {
            id,
            result: Some(serde_json::to_value(result).expect("result serializes")),
            error: None,
        }
    }

    pub fn err(id: u64, code: i64, message: impl Into<String>) -> Self {
        Self {
            id,
            result: None,
            error: Some(RpcError {
                code,
                message: message.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeResult {
    pub n: usize,
    pub eos_id: Option<TokenId>,
    pub model: String,
    /// Servers may echo the protocol version they speak.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_context: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitsResult {
    pub logits: LogitVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeResult {
    pub ids: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescribeResult {
    pub description: String,
}
