//! `slidegar` command-line driver.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! runtime failures. Failures also print one JSON line on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod pipeline;

#[derive(Debug, Parser)]
#[command(
    name = "slidegar",
    version,
    about = "Graph-based adaptive reranking for listwise rankers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and persist a BM25 index.
    BuildIndex {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Drop documents with duplicate normalized text.
        #[arg(long)]
        dedup: bool,
    },
    /// Validate an embedding file against a corpus and store it in corpus order.
    LoadEmbeddings {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dedup: bool,
        /// L2-normalize every vector.
        #[arg(long)]
        normalize: bool,
    },
    /// Build a fixed-degree corpus graph.
    BuildGraph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_parser = ["lexical", "dense"])]
        source: String,
        #[arg(long, default_value_t = 16)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Persisted index for the lexical source; built in memory otherwise.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Document embeddings for the dense source.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        dedup: bool,
    },
    /// Retrieve and rerank every query of a pipeline config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Score a run file against qrels.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value = "ndcg@10,recall@c")]
        metrics: String,
        /// Value of `c` in `recall@c`; defaults to the run's depth.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 1)]
        rel_threshold: u32,
        #[arg(long, default_value = "linear", value_parser = ["linear", "exponential"])]
        gain: String,
        /// Dedup report from `build-index`, to move judgments onto survivors.
        #[arg(long)]
        dedup_report: Option<PathBuf>,
        /// Second run; prints per-query deltas of the first metric.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run the adaptive strategy at several graph depths and tabulate.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "2,4,6,8,10,12,14,16", value_delimiter = ',')]
        k_list: Vec<usize>,
        #[arg(long, default_value = "ndcg@10,recall@c")]
        metrics: String,
        #[arg(long, default_value_t = 1)]
        rel_threshold: u32,
        /// Also write one run file per depth here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic collection.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// JSON generator spec; missing fields take defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        retrieval_gap: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BuildIndex { .. } => "build-index",
            Command::LoadEmbeddings { .. } => "load-embeddings",
            Command::BuildGraph { .. } => "build-graph",
            Command::Run { .. } => "run",
            Command::Eval { .. } => "eval",
            Command::SweepK { .. } => "sweep-k",
            Command::Synth { .. } => "synth",
        }
    }
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn report(command: &str, kind: &str, code: u8, message: String) -> ExitCode {
    let line = serde_json::json!({
        "error": kind,
        "exit_code": code,
        "command": command,
        "message": message,
    });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let text: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            return report(
                "",
                "usage",
                1,
                text.join(" ").trim_start_matches("error: ").to_string(),
            );
        }
    };
    let name = cli.command.name();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => report(name, "usage", 1, m),
        Err(Failure::Runtime(e)) => report(name, "runtime", 2, format!("{e:#}")),
    }
}
