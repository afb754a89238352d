use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    Nucleus,
    Beam,
    /// Contrastive decoding with a fixed contrast weight and cutoff.
    CdFixed,
    /// Description-contrastive decoding with divergence-driven weight and cutoff.
    Code,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Greedy,
        Strategy::Nucleus,
        Strategy::Beam,
        Strategy::CdFixed,
        Strategy::Code,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Nucleus => "nucleus",
            Strategy::Beam => "beam",
            Strategy::CdFixed => "cd_fixed",
            Strategy::Code => "code",
        }
    }

    /// Whether the strategy consumes the description-side provider.
    pub fn is_contrastive(self) -> bool {
        matches!(self, Strategy::CdFixed | Strategy::Code)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

/// How a token is drawn from the final per-step distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    #[default]
    Argmax,
    /// Seeded nucleus sampling at `temperature` and `top_p`.
    Sample,
}

impl Selector {
    pub fn as_str(self) -> &'static str {
        match self {
            Selector::Argmax => "argmax",
            Selector::Sample => "sample",
        }
    }
}

impl FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "argmax" => Ok(Selector::Argmax),
            "sample" => Ok(Selector::Sample),
            _ => Err(format!("unknown selector {s:?}")),
        }
    }
}

/// Fixed contrast weight and plausibility cutoff for [`Strategy::CdFixed`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdFixedParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for CdFixedParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub top_p: f64,
    pub temperature: f64,
    pub num_beams: usize,
    pub max_tokens: usize,
    pub rng_seed: u64,
    pub selector: Selector,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        let cd = CdFixedParams::default();
        Self {
            strategy: Strategy::Greedy,
            alpha: cd.alpha,
            beta: cd.beta,
            k: 0.3,
            top_p: 0.95,
            temperature: 1.0,
            num_beams: 5,
            max_tokens: 64,
            rng_seed: 0,
            selector: Selector::Argmax,
        }
    }
}

/// One violated constraint on a named config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every violation found, not just the first.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid config: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ConfigError(pub Vec<Violation>);

impl DecodeConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn cd_params(&self) -> CdFixedParams {
        CdFixedParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &'static str, message: String| {
            if !ok {
                out.push(Violation { field, message });
            }
        };
        check(
            self.alpha.is_finite() && self.alpha >= 0.0,
            "alpha",
            format!("must be finite and >= 0, got {}", self.alpha),
        );
        check(
            (0.0..=1.0).contains(&self.beta),
            "beta",
            format!("must be in [0, 1], got {}", self.beta),
        );
        check(
            self.k.is_finite() && self.k > 0.0,
            "k",
            format!("must be finite and > 0, got {}", self.k),
        );
        check(
            self.top_p > 0.0 && self.top_p <= 1.0,
            "top_p",
            format!("must be in (0, 1], got {}", self.top_p),
        );
        check(
            self.temperature.is_finite() && self.temperature > 0.0,
            "temperature",
            format!("must be finite and > 0, got {}", self.temperature),
        );
        check(self.num_beams >= 1, "num_beams", "must be >= 1".to_string());
        check(
            self.max_tokens >= 1,
            "max_tokens",
            "must be >= 1".to_string(),
        );
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(v))
        }
    }
}
