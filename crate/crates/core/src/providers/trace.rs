//! Recorded per-step logit streams and their teacher-forced replay.
//!
//! A trace file is one JSON document:
//!
//! ```text
//! {"header":{"format_version":1,"n":..,"vocab":[..],"eos_id":..,"model":..,
//!            "prompt":..,"k":..,"alpha":..,"beta":..,"note":..},
//! "steps":[
//! {"step":0,"logits_v":[..],"logits_d":[..],"recorded_choice":..},
//! ...
//! ]}
//! ```
//!
//! Floats are written with 17 significant digits and masked logits as the
//! string `"-inf"`. [`TraceFile::to_canonical_string`] is the canonical
//! form: parsing and re-emitting a canonical file reproduces it byte for
//! byte.

use std::io;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use super::{check_length, LogitProvider, ProviderError};
use crate::prob::argmax_token;
use crate::types::{Context, ContextPair, LogitVector, TokenId, Vocabulary};

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "v")]
    Visual,
    #[serde(rename = "d")]
    Description,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Visual => "v",
            Side::Description => "d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format_version: u32,
    pub n: usize,
    pub vocab: Vec<String>,
    #[serde(default)]
    pub eos_id: Option<TokenId>,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub prompt: String,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub note: String,
}

impl TraceHeader {
    pub fn new(vocab: &Vocabulary) -> Self {
        Self {
            format_version: TRACE_FORMAT_VERSION,
            n: vocab.len(),
            vocab: vocab.tokens().to_vec(),
            eos_id: vocab.eos_id(),
            model: String::new(),
            prompt: String::new(),
            k: 0.3,
            alpha: 1.0,
            beta: 0.1,
            note: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLogits {
    pub step: usize,
    pub logits_v: LogitVector,
    pub logits_d: LogitVector,
    pub recorded_choice: TokenId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub steps: Vec<StepLogits>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace i/o: {0}")]
    Io(#[from] io::Error),
    #[error("trace is not valid JSON for the schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed trace: {0}")]
    Invalid(String),
}

/// Writes every float as `d.dddddddddddddddde±x` (17 significant digits).
struct CanonicalFloats;

impl Formatter for CanonicalFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFloats);
    value
        .serialize(&mut ser)
        .expect("in-memory serialization of finite values");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

impl TraceFile {
    pub fn new(header: TraceHeader) -> Self {
        Self {
            header,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn vocabulary(&self) -> Result<Vocabulary, TraceError> {
        Vocabulary::new(self.header.vocab.clone(), self.header.eos_id)
            .map_err(|e| TraceError::Invalid(e.to_string()))
    }

    /// Checks the schema invariants serde cannot express.
    pub fn validate(&self) -> Result<(), TraceError> {
        let h = &self.header;
        let bad = |msg: String| Err(TraceError::Invalid(msg));
        if h.format_version != TRACE_FORMAT_VERSION {
            return bad(format!(
                "format_version {} (expected {TRACE_FORMAT_VERSION})",
                h.format_version
            ));
        }
        if h.n != h.vocab.len() {
            return bad(format!(
                "n = {} but vocab has {} entries",
                h.n,
                h.vocab.len()
            ));
        }
        self.vocabulary()?;
        for (i, s) in self.steps.iter().enumerate() {
            if s.step != i {
                return bad(format!("step index {} at position {i}", s.step));
            }
            if s.logits_v.len() != h.n || s.logits_d.len() != h.n {
                return bad(format!("step {i}: logit arrays must have {} entries", h.n));
            }
            if s.recorded_choice as usize >= h.n {
                return bad(format!(
                    "step {i}: recorded_choice {} out of range",
                    s.recorded_choice
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        let trace: TraceFile = serde_json::from_str(text)?;
        trace.validate()?;
        Ok(trace)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Canonical text: header on the first line, one step per line.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::from("{\"header\":");
        out.push_str(&to_canonical_json(&self.header));
        out.push_str(",\n\"steps\":[");
        for (i, step) in self.steps.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            out.push_str(&to_canonical_json(step));
        }
        out.push_str("\n]}\n");
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        std::fs::write(path, self.to_canonical_string())?;
        Ok(())
    }

    /// Recorded logits for one side at `step`.
    pub fn next_logits(&self, side: Side, step: usize) -> Result<&LogitVector, ProviderError> {
        let s = self.steps.get(step).ok_or(ProviderError::StepOutOfRange {
            step,
            len: self.steps.len(),
        })?;
        Ok(match side {
            Side::Visual => &s.logits_v,
            Side::Description => &s.logits_d,
        })
    }

    /// Greedy-decodes `steps` tokens from two live providers, recording both
    /// logit streams. `recorded_choice` is the argmax of the visual logits.
    pub fn record(
        header: TraceHeader,
        provider_v: &dyn LogitProvider,
        provider_d: &dyn LogitProvider,
        mut pair: ContextPair,
        steps: usize,
    ) -> Result<Self, ProviderError> {
        let mut trace = Self::new(header);
        let eos = provider_v.vocabulary().eos_id();
        for step in 0..steps {
            let logits_v = provider_v.next_logits(&pair.visual)?;
            let logits_d = provider_d.next_logits(&pair.description)?;
            let choice = argmax_token(&logits_v);
            trace.steps.push(StepLogits {
                step,
                logits_v,
                logits_d,
                recorded_choice: choice,
            });
            pair.push(choice);
            if Some(choice) == eos {
                break;
            }
        }
        Ok(trace)
    }
}

/// Teacher-forced replay of one side of a trace: the step index is the
/// number of tokens the context holds beyond its initial prefix.
#[derive(Debug, Clone)]
pub struct TraceProvider {
    trace: Arc<TraceFile>,
    vocab: Vocabulary,
    side: Side,
    prefix_len: usize,
}

impl TraceProvider {
    pub fn new(trace: Arc<TraceFile>, side: Side) -> Result<Self, TraceError> {
        trace.validate()?;
        let vocab = trace.vocabulary()?;
        Ok(Self {
            trace,
            vocab,
            side,
            prefix_len: 0,
        })
    }

    /// Both sides of a trace, sharing one parsed file.
    pub fn pair(trace: TraceFile) -> Result<(Self, Self), TraceError> {
        let trace = Arc::new(trace);
        Ok((
            Self::new(trace.clone(), Side::Visual)?,
            Self::new(trace, Side::Description)?,
        ))
    }

    /// Length of the context before the first replayed step.
    pub fn with_prefix_len(mut self, prefix_len: usize) -> Self {
        self.prefix_len = prefix_len;
        self
    }

    pub fn trace(&self) -> &TraceFile {
        &self.trace
    }
}

impl LogitProvider for TraceProvider {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// The last recorded step is read with a context of
    /// `prefix_len + len − 1` tokens.
    fn max_context(&self) -> Option<usize> {
        Some(self.prefix_len + self.trace.len().saturating_sub(1))
    }

    fn next_logits(&self, ctx: &Context) -> Result<LogitVector, ProviderError> {
        let step =
            ctx.len()
                .checked_sub(self.prefix_len)
                .ok_or(ProviderError::ContextTooShort {
                    len: ctx.len(),
                    base: self.prefix_len,
                })?;
        let logits = self.trace.next_logits(self.side, step)?.clone();
        check_length(&logits, self.vocab.len())?;
        Ok(logits)
    }
}
