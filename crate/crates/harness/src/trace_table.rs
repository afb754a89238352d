//! Token-level tables over a recorded trace: the top tokens by visual,
//! description and contrasted logits at each step.

use std::fmt::Write as _;
use std::ops::Range;

use code_core::providers::TraceFile;
use code_core::strategies::code_step;
use code_core::{argmax_token, LogitVector, TokenId, Vocabulary};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: TokenId,
    pub token: String,
    /// `None` stands for a masked (`-inf`) score.
    pub logit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub divergence: f64,
    pub alpha_t: f64,
    pub beta_t: f64,
    pub top_v: Vec<Scored>,
    pub top_d: Vec<Scored>,
    pub top_code: Vec<Scored>,
    /// Argmax of the visual logits.
    pub greedy: TokenId,
    /// Argmax of the contrasted logits.
    pub code: TokenId,
    /// The contrast changed the argmax at this step.
    pub flip: bool,
}

/// Parses `a..b`, `a..=b`, `a..`, `..b`, `..` or a single index.
pub fn parse_steps(spec: &str, len: usize) -> Result<Range<usize>, HarnessError> {
    let bad = || HarnessError::Usage(format!("step range {spec:?} is not of the form a..b"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let range = if let Some((a, b)) = spec.split_once("..") {
        let start = if a.trim().is_empty() { 0 } else { num(a)? };
        let end = match b.strip_prefix('=') {
            Some(b) => num(b)? + 1,
            None if b.trim().is_empty() => len.max(start),
            None => num(b)?,
        };
        start..end
    } else {
        let i = num(spec)?;
        i..i + 1
    };
    if range.start > range.end {
        return Err(bad());
    }
    Ok(range)
}

fn scored(vocab: &Vocabulary, logits: &LogitVector, j: usize) -> Vec<Scored> {
    logits
        .top(j)
        .into_iter()
        .map(|id| {
            let x = logits.as_slice()[id as usize];
            Scored {
                id,
                token: vocab.token(id).unwrap_or("?").to_string(),
                logit: x.is_finite().then_some(x),
            }
        })
        .collect()
}

/// Rows for `steps`, contrasting with smoothing exponent `k`. A nonempty
/// range reaching past the trace is an error.
pub fn build_rows(
    trace: &TraceFile,
    steps: Range<usize>,
    top: usize,
    k: f64,
) -> Result<Vec<TraceRow>, HarnessError> {
    if steps.is_empty() {
        return Ok(Vec::new());
    }
    if steps.end > trace.len() {
        return Err(HarnessError::Usage(format!(
            "step {} is past the end of a {}-step trace",
            steps.end - 1,
            trace.len()
        )));
    }
    let vocab = trace.vocabulary()?;
    trace.steps[steps]
        .iter()
        .map(|s| {
            let c = code_step(&s.logits_v, &s.logits_d, k)
                .map_err(|e| HarnessError::Usage(format!("step {}: {e}", s.step)))?;
            let greedy = argmax_token(&s.logits_v);
            let code = argmax_token(&c.contrasted_logits);
            Ok(TraceRow {
                step: s.step,
                divergence: c.divergence.expect("set by the contrastive step"),
                alpha_t: c.alpha_t,
                beta_t: c.beta_t,
                top_v: scored(&vocab, &s.logits_v, top),
                top_d: scored(&vocab, &s.logits_d, top),
                top_code: scored(&vocab, &c.contrasted_logits, top),
                greedy,
                code,
                flip: greedy != code,
            })
        })
        .collect()
}

const CELL: usize = 26;

fn cell(s: Option<&Scored>) -> String {
    match s {
        Some(s) => {
            let logit = s
                .logit
                .map_or_else(|| "-inf".to_string(), |x| format!("{x:.2}"));
            let name: String = s.token.chars().take(CELL - 10).collect();
            format!("{name:<w$}{logit:>9}", w = CELL - 9)
        }
        None => " ".repeat(CELL),
    }
}

/// Fixed-width rendering. Steps where the contrast flips the argmax are
/// marked with `>>` and a trailing `FLIP`.
pub fn render(rows: &[TraceRow]) -> String {
    let mut s = String::new();
    if rows.is_empty() {
        s.push_str("(no steps)\n");
        return s;
    }
    for row in rows {
        let name = |rank: &[Scored], id: TokenId| {
            rank.iter()
                .chain(&row.top_v)
                .find(|x| x.id == id)
                .map_or_else(|| format!("#{id}"), |x| x.token.clone())
        };
        let _ = writeln!(
            s,
            "{} step {:<4} D={:.4}  alpha={:.4}  beta={:.4}  greedy={}  code={}{}",
            if row.flip { ">>" } else { "  " },
            row.step,
            row.divergence,
            row.alpha_t,
            row.beta_t,
            name(&row.top_v, row.greedy),
            name(&row.top_code, row.code),
            if row.flip { "  FLIP" } else { "" },
        );
        let _ = writeln!(
            s,
            "   {:>4}  {:<w$}  {:<w$}  {:<w$}",
            "rank",
            "logit_v",
            "logit_d",
            "logit_code",
            w = CELL
        );
        let depth = row.top_v.len().max(row.top_d.len()).max(row.top_code.len());
        for r in 0..depth {
            let _ = writeln!(
                s,
                "   {:>4}  {}  {}  {}",
                r + 1,
                cell(row.top_v.get(r)),
                cell(row.top_d.get(r)),
                cell(row.top_code.get(r)),
            );
        }
        s.push('\n');
    }
    s.lines().map(|l| l.trim_end().to_string() + "\n").collect()
}
