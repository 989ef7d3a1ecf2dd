//! `privcomp`: build a regulation knowledge graph, map provider policies to
//! articles, infer required compliance and report gaps.
//!
//! Exit status: 0 compliant or success, 1 gaps found, 2 usage or data error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const ENDPOINT_ENV: &str = "PRIVCOMP_GENERATOR_ENDPOINT";

#[derive(Parser, Debug)]
#[command(name = "privcomp", version, about = "GDPR compliance gaps from provider privacy policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a regulation and its obligation map and export the graph as Turtle.
    Ingest(IngestArgs),
    /// Map provider policies to articles, infer requirements and report gaps.
    Check(CheckArgs),
    /// Report the gap for one provider of an existing graph.
    Gaps(GapsArgs),
    /// Score retrieval against annotated segments over a range of thresholds.
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Backend {
    Extractive,
    External,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    regulation: PathBuf,
    #[arg(long)]
    obligations: PathBuf,
    /// Turtle output; written to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct InferenceArgs {
    /// Extra rule file, applied together with the built-in role rules.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Obligation roles that bind providers.
    #[arg(long, value_delimiter = ',', default_value = "Provider,Common")]
    roles: Vec<String>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Graph produced by `ingest`.
    #[arg(long)]
    kg: PathBuf,
    /// Regulation source used to build the retrieval index.
    #[arg(long)]
    regulation: PathBuf,
    #[arg(long)]
    policies: PathBuf,
    /// Maximum retrieval distance.
    #[arg(long, default_value_t = commands::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Keep at most this many chunks per segment; 0 keeps all within the threshold.
    #[arg(long, default_value_t = commands::DEFAULT_TOP_K)]
    top_k: usize,
    /// Segments with fewer tokens are ignored.
    #[arg(long, default_value_t = commands::DEFAULT_MIN_TOKENS)]
    min_tokens: usize,
    #[arg(long, value_enum, default_value_t = Backend::Extractive)]
    backend: Backend,
    /// `tcp://host:port` or a shell command speaking the line protocol.
    #[arg(long, env = ENDPOINT_ENV)]
    external_endpoint: Option<String>,
    #[arg(long, default_value_t = 5000)]
    external_timeout_ms: u64,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Write the graph with compliance and inferred requirements here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the reports here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write per-segment answers here.
    #[arg(long)]
    answers: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Args, Debug)]
struct GapsArgs {
    #[arg(long)]
    kg: PathBuf,
    #[arg(long)]
    provider: String,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    regulation: PathBuf,
    #[arg(long)]
    policies: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = commands::DEFAULT_SWEEP.to_vec())]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = commands::DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long, default_value_t = commands::DEFAULT_MIN_TOKENS)]
    min_tokens: usize,
    /// Also write the table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Check(a) => commands::check(a),
        Command::Gaps(a) => commands::gaps(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
