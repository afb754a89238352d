//! Several strategies on the same providers and context.

use std::fmt::Write as _;
use std::str::FromStr;

use code_core::strategies::CallCounts;
use code_core::{decode, exec, DecodeConfig, Selector, Strategy, TokenId};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::session::Session;

/// A strategy name with optional parameter overrides, e.g. `code:k=10` or
/// `cd_fixed:alpha=0.5,beta=0.2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub label: String,
    pub strategy: Strategy,
    overrides: Vec<(String, String)>,
}

const OVERRIDABLE: [&str; 7] = [
    "alpha",
    "beta",
    "k",
    "top_p",
    "temperature",
    "num_beams",
    "selector",
];

impl FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let strategy = name.parse()?;
        let mut overrides = Vec::new();
        for kv in params.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| format!("{kv:?} in {s:?} is not key=value"))?;
            if !OVERRIDABLE.contains(&key) {
                return Err(format!(
                    "{key:?} cannot be set per strategy (allowed: {})",
                    OVERRIDABLE.join(", ")
                ));
            }
            overrides.push((key.to_string(), value.to_string()));
        }
        let spec = StrategySpec {
            label: s.to_string(),
            strategy,
            overrides,
        };
        spec.apply(&DecodeConfig::default())?;
        Ok(spec)
    }
}

impl StrategySpec {
    pub fn plain(strategy: Strategy) -> Self {
        Self {
            label: strategy.to_string(),
            strategy,
            overrides: Vec::new(),
        }
    }

    /// `base` with this strategy and its overrides applied.
    pub fn apply(&self, base: &DecodeConfig) -> Result<DecodeConfig, String> {
        let mut c = base.clone();
        c.strategy = self.strategy;
        for (key, value) in &self.overrides {
            let bad = |e: &dyn std::fmt::Display| format!("{}: {key}={value}: {e}", self.label);
            let float = || value.parse::<f64>().map_err(|e| bad(&e));
            match key.as_str() {
                "alpha" => c.alpha = float()?,
                "beta" => c.beta = float()?,
                "k" => c.k = float()?,
                "top_p" => c.top_p = float()?,
                "temperature" => c.temperature = float()?,
                "num_beams" => c.num_beams = value.parse().map_err(|e| bad(&e))?,
                "selector" => c.selector = value.parse::<Selector>().map_err(|e| bad(&e))?,
                _ => unreachable!("checked when parsed"),
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareEntry {
    pub label: String,
    pub strategy: Strategy,
    pub tokens: Vec<TokenId>,
    pub text: String,
    /// Per-step contrast weight; zeros for single-stream strategies.
    pub alpha_series: Vec<f64>,
    pub calls: CallCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub entries: Vec<CompareEntry>,
    /// First step at which any two outputs differ, if they ever do.
    pub first_divergence: Option<usize>,
}

/// First index where the sequences disagree, counting a sequence that has
/// ended as disagreeing with one that continues.
pub fn first_divergence(seqs: &[&[TokenId]]) -> Option<usize> {
    let longest = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
    (0..longest).find(|&t| {
        let first = seqs[0].get(t);
        seqs.iter().any(|s| s.get(t) != first)
    })
}

/// Runs every spec concurrently on the shared providers.
pub fn run_compare(
    session: &Session,
    base: &DecodeConfig,
    specs: &[StrategySpec],
) -> Result<CompareReport, HarnessError> {
    if specs.len() < 2 {
        return Err(HarnessError::Usage(
            "compare needs at least two strategies".into(),
        ));
    }
    let configs = specs
        .iter()
        .map(|s| s.apply(&session.fit(base)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Config(vec![e]))?;
    let outputs = exec::batch(&configs, |config| {
        decode(
            &*session.visual,
            session.description_provider(),
            session.pair.clone(),
            config,
        )
    });
    let mut entries = Vec::with_capacity(specs.len());
    for (spec, out) in specs.iter().zip(outputs) {
        let out = out?;
        entries.push(CompareEntry {
            label: spec.label.clone(),
            strategy: spec.strategy,
            text: session.vocab.decode(&out.tokens),
            alpha_series: out.trace.iter().map(|r| r.alpha_t).collect(),
            tokens: out.tokens,
            calls: out.calls,
        });
    }
    let seqs: Vec<&[TokenId]> = entries.iter().map(|e| e.tokens.as_slice()).collect();
    let first_divergence = first_divergence(&seqs);
    Ok(CompareReport {
        entries,
        first_divergence,
    })
}

impl CompareReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let width = self
            .entries
            .iter()
            .map(|e| e.label.len())
            .max()
            .unwrap_or(0)
            .max(8);
        for e in &self.entries {
            let _ = writeln!(s, "{:<width$}  {}", e.label, e.text);
        }
        match self.first_divergence {
            Some(t) => {
                let _ = writeln!(s, "\nfirst divergence at step {t}");
            }
            None => s.push_str("\nno divergence\n"),
        }
        for e in self
            .entries
            .iter()
            .filter(|e| e.alpha_series.iter().any(|&a| a != 0.0))
        {
            let alphas: Vec<String> = e.alpha_series.iter().map(|a| format!("{a:.3}")).collect();
            let _ = writeln!(s, "alpha_t {:<width$}  {}", e.label, alphas.join(" "));
        }
        s
    }
}
