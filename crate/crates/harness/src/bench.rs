//! Throughput and latency of repeated decodes, one strategy at a time.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use code_core::providers::Instrumented;
use code_core::strategies::CallCounts;
use code_core::{decode, LogitProvider, Strategy};
use serde::{Deserialize, Serialize};

use crate::compare::StrategySpec;
use crate::error::HarnessError;
use crate::session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub p95: f64,
}

/// Median and nearest-rank 95th percentile.
pub fn summarize(samples: &[f64]) -> Summary {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Summary {
        median,
        p95: v[rank - 1],
    }
}

/// Upper bounds (µs) of the call-latency histogram buckets; the last
/// bucket is unbounded.
pub const LATENCY_BOUNDS_US: [u64; 6] = [10, 100, 1_000, 10_000, 100_000, 1_000_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    /// Inclusive upper bound in microseconds; `None` for the overflow bucket.
    pub le_us: Option<u64>,
    pub count: u64,
}

fn histogram(latencies: impl IntoIterator<Item = Duration>) -> Vec<Bucket> {
    let mut buckets: Vec<Bucket> = LATENCY_BOUNDS_US
        .iter()
        .map(|&b| Bucket {
            le_us: Some(b),
            count: 0,
        })
        .chain([Bucket {
            le_us: None,
            count: 0,
        }])
        .collect();
    for lat in latencies {
        let us = lat.as_micros();
        let i = LATENCY_BOUNDS_US
            .iter()
            .position(|&b| us <= b as u128)
            .unwrap_or(LATENCY_BOUNDS_US.len());
        buckets[i].count += 1;
    }
    buckets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyBench {
    pub label: String,
    pub strategy: Strategy,
    /// Tokens emitted per decode.
    pub tokens: usize,
    /// Provider calls per decode.
    pub calls: CallCounts,
    pub calls_per_token: f64,
    pub tokens_per_second: Summary,
    pub ms_per_token: Summary,
    /// Latency of every provider call during the timed repetitions.
    pub call_latency: Vec<Bucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub warmup: usize,
    pub reps: usize,
    /// One-time cost of producing the description context, kept out of
    /// the per-token figures.
    pub description_ms: f64,
    pub strategies: Vec<StrategyBench>,
}

/// `warmup` untimed and `reps` timed decodes per spec, strictly one after
/// another.
pub fn run_bench(
    session: &Session,
    base: &code_core::DecodeConfig,
    specs: &[StrategySpec],
    warmup: usize,
    reps: usize,
) -> Result<BenchReport, HarnessError> {
    if reps == 0 {
        return Err(HarnessError::Config(vec!["reps: must be >= 1".into()]));
    }
    if specs.is_empty() {
        return Err(HarnessError::Usage(
            "bench needs at least one strategy".into(),
        ));
    }
    let visual = Instrumented::new(&*session.visual);
    let description = session.description.as_deref().map(Instrumented::new);
    let d_side = description.as_ref().map(|d| d as &dyn LogitProvider);

    let mut strategies = Vec::with_capacity(specs.len());
    for spec in specs {
        let config = spec
            .apply(&session.fit(base))
            .map_err(|e| HarnessError::Config(vec![e]))?;
        let run = || decode(&visual, d_side, session.pair.clone(), &config);
        for _ in 0..warmup {
            run()?;
        }
        visual.reset();
        if let Some(d) = &description {
            d.reset();
        }
        let mut tps = Vec::with_capacity(reps);
        let mut mspt = Vec::with_capacity(reps);
        let mut last = None;
        for _ in 0..reps {
            let start = Instant::now();
            let out = run()?;
            let wall = start.elapsed().as_secs_f64();
            let n = out.tokens.len().max(1) as f64;
            tps.push(n / wall);
            mspt.push(wall * 1e3 / n);
            last = Some(out);
        }
        let out = last.expect("reps >= 1");
        let latencies = visual
            .latencies()
            .into_iter()
            .chain(description.iter().flat_map(|d| d.latencies()));
        strategies.push(StrategyBench {
            label: spec.label.clone(),
            strategy: spec.strategy,
            tokens: out.tokens.len(),
            calls: out.calls,
            calls_per_token: out.calls.total() as f64 / out.tokens.len().max(1) as f64,
            tokens_per_second: summarize(&tps),
            ms_per_token: summarize(&mspt),
            call_latency: histogram(latencies),
        });
    }
    Ok(BenchReport {
        warmup,
        reps,
        description_ms: session.description_time.as_secs_f64() * 1e3,
        strategies,
    })
}

impl BenchReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} timed reps after {} warmup; description {:.3} ms (excluded)\n",
            self.reps, self.warmup, self.description_ms
        );
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>10} {:>12} {:>12} {:>12} {:>12}",
            "strategy", "tokens", "calls/tok", "tok/s med", "tok/s p95", "ms/tok med", "ms/tok p95"
        );
        for b in &self.strategies {
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>10.2} {:>12.1} {:>12.1} {:>12.4} {:>12.4}",
                b.label,
                b.tokens,
                b.calls_per_token,
                b.tokens_per_second.median,
                b.tokens_per_second.p95,
                b.ms_per_token.median,
                b.ms_per_token.p95
            );
        }
        s.push_str("\ncall latency\n");
        for b in &self.strategies {
            let cells: Vec<String> = b
                .call_latency
                .iter()
                .map(|x| match x.le_us {
                    Some(us) => format!("<={us}us:{}", x.count),
                    None => format!(
                        ">{}us:{}",
                        LATENCY_BOUNDS_US[LATENCY_BOUNDS_US.len() - 1],
                        x.count
                    ),
                })
                .collect();
            let _ = writeln!(s, "{:<16} {}", b.label, cells.join(" "));
        }
        s
    }
}
