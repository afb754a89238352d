use std::fmt::Write as _;
use std::time::{Duration, Instant};

use code_core::strategies::CallCounts;
use code_core::{decode, DecodeConfig, StepRecord, Strategy, TokenId, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::session::Session;

/// Wall-clock measurements of one decode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_ms: f64,
    pub tokens_per_second: f64,
    pub ms_per_token: f64,
    /// Producing the description context; not part of `wall_ms`.
    pub description_ms: f64,
}

impl Timings {
    pub fn new(wall: Duration, tokens: usize, description: Duration) -> Self {
        let wall_ms = wall.as_secs_f64() * 1e3;
        let (tokens_per_second, ms_per_token) = if tokens == 0 || wall.is_zero() {
            (0.0, 0.0)
        } else {
            (tokens as f64 / wall.as_secs_f64(), wall_ms / tokens as f64)
        };
        Self {
            wall_ms,
            tokens_per_second,
            ms_per_token,
            description_ms: description.as_secs_f64() * 1e3,
        }
    }
}

/// Outcome of a single decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: Strategy,
    pub tokens: Vec<TokenId>,
    pub text: String,
    pub steps: Vec<StepRecord>,
    pub calls: CallCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Decodes once with the session's providers.
pub fn run_decode(session: &Session, config: &DecodeConfig) -> Result<RunReport, HarnessError> {
    let config = session.fit(config);
    let start = Instant::now();
    let out = decode(
        &*session.visual,
        session.description_provider(),
        session.pair.clone(),
        &config,
    )?;
    let wall = start.elapsed();
    Ok(RunReport {
        strategy: config.strategy,
        text: session.vocab.decode(&out.tokens),
        timings: Some(Timings::new(
            wall,
            out.tokens.len(),
            session.description_time,
        )),
        tokens: out.tokens,
        steps: out.trace,
        calls: out.calls,
    })
}

fn token_name(vocab: &Vocabulary, id: TokenId) -> String {
    vocab
        .token(id)
        .map_or_else(|| format!("#{id}"), str::to_string)
}

impl RunReport {
    pub fn render_text(&self, vocab: &Vocabulary) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "strategy  {}", self.strategy);
        let _ = writeln!(s, "text      {}", self.text);
        let ids: Vec<String> = self.tokens.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "tokens    [{}]", ids.join(", "));
        let _ = writeln!(
            s,
            "calls     visual {} / description {} / per token {:.2}",
            self.calls.visual,
            self.calls.description,
            self.calls.total() as f64 / self.tokens.len().max(1) as f64
        );
        if let Some(t) = &self.timings {
            let _ = writeln!(
                s,
                "timing    {:.3} ms wall, {:.1} tokens/s, {:.4} ms/token, description {:.3} ms",
                t.wall_ms, t.tokens_per_second, t.ms_per_token, t.description_ms
            );
        }
        if self.steps.iter().any(|r| r.divergence.is_some()) {
            let _ = writeln!(
                s,
                "\n{:>4}  {:<16} {:>8} {:>8} {:>8} {:>5}",
                "step", "token", "D", "alpha", "beta", "head"
            );
            for r in &self.steps {
                let _ = writeln!(
                    s,
                    "{:>4}  {:<16} {:>8.4} {:>8.4} {:>8.4} {:>5}",
                    r.step,
                    token_name(vocab, r.chosen),
                    r.divergence.unwrap_or(f64::NAN),
                    r.alpha_t,
                    r.beta_t,
                    r.head_set.len()
                );
            }
        }
        s
    }
}
