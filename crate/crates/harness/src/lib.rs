//! Command-line harness for the contrastive decoding engine: layered
//! configuration, provider setup, and the decode, trace, bench, compare and
//! describe commands.

pub mod bench;
pub mod cli;
pub mod compare;
pub mod config;
pub mod error;
pub mod report;
pub mod session;
pub mod trace_table;

pub use bench::{run_bench, BenchReport};
pub use compare::{run_compare, CompareReport, StrategySpec};
pub use config::{Layer, ProviderKind, Settings};
pub use error::HarnessError;
pub use report::{run_decode, RunReport, Timings};
pub use session::Session;
