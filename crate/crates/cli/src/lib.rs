//! `scimcp`: serve a deployment, run scripted scenarios, benchmark tool
//! retrieval and summarize execution traces.
//!
//! Exit codes: 0 success, 1 outcome mismatch or runtime failure, 2 bad
//! config, file or input, 3 bind failure, 4 recall monotonicity failure.

pub mod bench;
pub mod config;
pub mod report;
pub mod scenario;
pub mod serve;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

pub const EXIT_MISMATCH: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_BIND: u8 = 3;
pub const EXIT_MONOTONICITY: u8 = 4;

/// Fixture used when neither a flag nor the input file names one.
pub const FIXTURE_ENV: &str = "SCI_MCP_FIXTURE";

/// An error plus the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

pub(crate) trait ExitCodeExt<T> {
    fn exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitCodeExt<T> for Result<T, E> {
    fn exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(code, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransportChoice {
    Stdio,
    #[default]
    Http,
}

#[derive(Debug, Parser)]
#[command(name = "scimcp", version, about = "MCP servers for simulated science infrastructure")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Host servers from a fixture until interrupted.
    Serve {
        /// Deployment config file (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fixture file; defaults to the config's, then $SCI_MCP_FIXTURE.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long, value_enum)]
        transport: Option<TransportChoice>,
        /// First listener address; further servers take the following ports.
        #[arg(long)]
        bind: Option<String>,
        /// Comma-separated subset of transfer,compute,search,status,events,discovery,auth.
        #[arg(long, value_delimiter = ',')]
        servers: Vec<String>,
        /// Tool corpus for the discovery server.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Run a scenario file and compare against its expected outcome.
    Scenario {
        path: PathBuf,
        /// Overrides the scenario's fixture.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Trace output path. Defaults to <scenario name>.trace.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recall@k of each documentation strategy over a benchmark.
    BenchRecall {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// Comma-separated strategy names. Defaults to all four.
        #[arg(long, value_delimiter = ',')]
        strategy: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        k: Vec<usize>,
        /// Report output path. Defaults to recall_report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a trace written by `scenario`.
    Report { trace: PathBuf },
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve {
            config,
            fixture,
            transport,
            bind,
            servers,
            corpus,
        } => serve::run(serve::ServeArgs {
            config,
            fixture,
            transport,
            bind,
            servers,
            corpus,
        }),
        Command::Scenario { path, fixture, out } => scenario::run(&path, fixture.as_deref(), out.as_deref()),
        Command::BenchRecall {
            config,
            corpus,
            benchmark,
            strategy,
            k,
            out,
        } => bench::run(bench::BenchArgs {
            config,
            corpus,
            benchmark,
            strategies: strategy,
            ks: k,
            out,
        }),
        Command::Report { trace } => report::run(&trace),
    }
}
