//! Benchmark harness: dataset ingestion, self-contained sampling, scripted
//! annotators and scoring.

mod ingest;
mod metrics;
mod oracle;
mod runner;
mod sample;

use thiserror::Error;

use crate::dsl::SyntaxDiagnostic;
use crate::protocol::ProtocolError;

pub use ingest::{ingest, ingest_str, normalize_ascii, BenchmarkDataset, IngestOptions, DEFAULT_ID_COLUMN, DEFAULT_SEPARATOR};
pub use metrics::{is_in_literals, score, token_usage_report, Scores, TokenUsage};
pub use oracle::{
    auto_annotation, auto_annotation_source, relax, relax_tokens, token_chain, token_chain_source, tokens, Relaxed,
    Replay, ScriptedOracle, Strategy, TokenFrequency,
};
pub use runner::{drive, run_benchmark, BenchConfig, MetricsReport, RoundMetrics};
pub use sample::{sample_self_contained, GoldStandard, SelfContainedSample};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("unknown attribute `{attribute}` (available: {})", .available.join(", "))]
    UnknownAttribute { attribute: String, available: Vec<String> },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("gold pair refers to unknown id `{0}`")]
    UnknownGoldId(String),
    #[error("requested {requested} matches but the gold standard has {available}")]
    NotEnoughMatches { requested: usize, available: usize },
    #[error("record `{0}` has no content to annotate")]
    EmptyContent(String),
    #[error("program is not a token chain")]
    NotTokenChain,
    #[error("no replay program for `{id}` in round {round}")]
    MissingReplay { id: String, round: u32 },
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Dsl(Vec<SyntaxDiagnostic>),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}
