use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use code_core::providers::TraceFile;
use serde::Serialize;

use crate::bench::run_bench;
use crate::compare::{run_compare, StrategySpec};
use crate::config::{Layer, ProviderKind, Settings};
use crate::error::HarnessError;
use crate::report::run_decode;
use crate::session::Session;
use crate::trace_table::{build_rows, parse_steps, render};

#[derive(Debug, Parser)]
#[command(
    name = "codedec",
    version,
    about = "Contrastive decoding runs, comparisons, traces and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    /// Pretty-printed JSON.
    Machine,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file with default settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,
    /// Write the report to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub layer: Layer,
}

impl Common {
    fn settings(&self) -> Result<Settings, HarnessError> {
        Settings::from_sources(&self.layer, self.config.as_deref())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode once and report tokens, per-step records and call counts.
    Decode {
        #[command(flatten)]
        common: Common,
        /// Include wall-clock timing (makes output vary between runs).
        #[arg(long)]
        timings: bool,
    },
    /// Tabulate top tokens per step of a trace file.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Steps to show: a..b, a..=b, a.., ..b, .. or a single index.
        #[arg(long, default_value = "..")]
        steps: String,
        /// Tokens listed per column.
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Time repeated decodes per strategy.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Strategies such as `greedy` or `code:k=1`; defaults to --strategy.
        strategies: Vec<StrategySpec>,
    },
    /// Run two or more strategies side by side.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Strategies such as `greedy`, `code`, `code:k=10`.
        #[arg(required = true)]
        strategies: Vec<StrategySpec>,
    },
    /// Produce the description context and print it.
    Describe {
        #[command(flatten)]
        common: Common,
    },
}

fn emit<T: Serialize>(format: OutputFormat, value: &T, text: impl FnOnce() -> String) -> String {
    match format {
        OutputFormat::Text => text(),
        OutputFormat::Machine => {
            let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
            s.push('\n');
            s
        }
    }
}

#[derive(Serialize)]
struct DescribeOutput<'a> {
    description: &'a str,
}

/// Makes validation insist on a description side when any spec needs one.
fn require_description_side(settings: &mut Settings, specs: &[StrategySpec]) {
    if let Some(s) = specs.iter().find(|s| s.strategy.is_contrastive()) {
        settings.decode.strategy = s.strategy;
    }
}

/// Runs one command and returns what it prints.
pub fn execute(cli: &Cli) -> Result<(String, Option<PathBuf>), HarnessError> {
    let (common, text) = match &cli.command {
        Command::Decode { common, timings } => {
            let settings = common.settings()?;
            let session = Session::open(&settings)?;
            let mut report = run_decode(&session, &settings.decode)?;
            if !timings {
                report.timings = None;
            }
            let out = emit(common.output, &report, || {
                report.render_text(&session.vocab)
            });
            (common, out)
        }
        Command::Trace { common, steps, top } => {
            let settings = common.settings()?;
            let path = settings.trace_file.as_ref().ok_or_else(|| {
                HarnessError::Config(vec![
                    "trace_file: the trace command needs --trace-file".into()
                ])
            })?;
            if let Err(e) = settings.decode.validate() {
                return Err(HarnessError::Config(
                    e.0.iter().map(ToString::to_string).collect(),
                ));
            }
            let trace = TraceFile::load(path)?;
            let range = parse_steps(steps, trace.len())?;
            let rows = build_rows(&trace, range, *top, settings.decode.k)?;
            (common, emit(common.output, &rows, || render(&rows)))
        }
        Command::Bench {
            common,
            reps,
            warmup,
            strategies,
        } => {
            let mut settings = common.settings()?;
            let specs = if strategies.is_empty() {
                vec![StrategySpec::plain(settings.decode.strategy)]
            } else {
                strategies.clone()
            };
            require_description_side(&mut settings, &specs);
            let session = Session::open(&settings)?;
            let report = run_bench(&session, &settings.decode, &specs, *warmup, *reps)?;
            (
                common,
                emit(common.output, &report, || report.render_text()),
            )
        }
        Command::Compare { common, strategies } => {
            let mut settings = common.settings()?;
            require_description_side(&mut settings, strategies);
            let session = Session::open(&settings)?;
            let report = run_compare(&session, &settings.decode, strategies)?;
            (
                common,
                emit(common.output, &report, || report.render_text()),
            )
        }
        Command::Describe { common } => {
            let settings = common.settings()?;
            let needed = match settings.provider {
                ProviderKind::Ngram => settings.scene.is_some() || settings.description.is_some(),
                ProviderKind::Remote => settings.image.is_some(),
                ProviderKind::Trace => false,
            };
            if !needed {
                return Err(HarnessError::Config(vec![
                    "describe needs --scene (ngram) or --image (remote)".into(),
                ]));
            }
            let session = Session::open(&settings)?;
            let description = session.description_text.clone().unwrap_or_default();
            let out = emit(
                common.output,
                &DescribeOutput {
                    description: &description,
                },
                || format!("{description}\n"),
            );
            (common, out)
        }
    };
    Ok((text, common.out.clone()))
}
