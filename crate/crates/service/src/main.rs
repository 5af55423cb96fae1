use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use blindanno::bench::{ingest, run_benchmark, BenchConfig, BenchError, GoldStandard, IngestOptions};
use blindanno::dsl;
use blindanno::protocol::{ProtocolError, Session, SessionConfig};
use blindanno_service::{router, AppState, ServiceOptions, Tokens};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "blindanno", version, about = "Blind annotation sessions and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Host a session over HTTP.
    Serve(ServeArgs),
    /// Benchmark runs with scripted annotators.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Session documents.
    #[command(subcommand)]
    Session(SessionCommand),
    /// Parse and check an annotation program; prints diagnostics.
    Check { file: PathBuf },
    /// Print the function registry and token manifest as JSON.
    Manifest,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Also write the role tokens to this file as JSON.
    #[arg(long)]
    tokens_out: Option<PathBuf>,
    #[arg(long, default_value = "dataset_a")]
    name_a: String,
    #[arg(long, default_value = "dataset_b")]
    name_b: String,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset_a: PathBuf,
    #[arg(long)]
    dataset_b: PathBuf,
    /// Attribute columns of dataset A, comma separated or repeated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    attrs_a: Vec<String>,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    attrs_b: Vec<String>,
    /// Joins the selected attributes into one record string.
    #[arg(long, default_value = blindanno::bench::DEFAULT_SEPARATOR)]
    separator: String,
    #[arg(long, default_value = blindanno::bench::DEFAULT_ID_COLUMN)]
    id_column: String,
}

#[derive(Subcommand)]
enum BenchCommand {
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 50)]
        matches: usize,
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        /// Defaults to BLINDANNO_SEED, then to a random seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SessionCommand {
    /// Create a session document from two CSV files.
    Init {
        #[command(flatten)]
        data: DataArgs,
        /// Records sampled from A; all of them when omitted.
        #[arg(long)]
        sample_a: Option<usize>,
        #[arg(long)]
        sample_b: Option<usize>,
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid address: {0}")]
    Address(#[from] std::net::AddrParseError),
    #[error("{0} error(s) in program")]
    Diagnostics(usize),
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.or_else(blindanno::seed::env_seed).unwrap_or_else(blindanno::seed::next_u64)
}

fn load_data(d: &DataArgs) -> Result<[blindanno::bench::BenchmarkDataset; 2], CliError> {
    let opts = IngestOptions {
        separator: d.separator.clone(),
        id_column: d.id_column.clone(),
    };
    Ok([ingest(&d.dataset_a, &d.attrs_a, &opts)?, ingest(&d.dataset_b, &d.attrs_b, &opts)?])
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn bench_run(data: &DataArgs, gold: &Path, matches: usize, rounds: u32, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let [a, b] = load_data(data)?;
    let gold = GoldStandard::load(gold)?;
    let config = BenchConfig {
        matches,
        rounds,
        seed: resolve_seed(seed),
        ..Default::default()
    };
    let report = run_benchmark(&a, &b, &gold, &config)?;
    std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    std::fs::write(sibling(out, "rounds.csv"), report.rounds_csv())?;
    std::fs::write(sibling(out, "tokens.csv"), report.tokens_csv())?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    println!(
        "seed {}: {} x {} records, {} rounds, precision {} recall {} f-measure {}",
        config.seed,
        report.records_a,
        report.records_b,
        report.rounds.len(),
        fmt(report.scores.precision),
        fmt(report.scores.recall),
        fmt(report.scores.f_measure)
    );
    Ok(())
}

fn session_init(data: &DataArgs, sample: [Option<usize>; 2], rounds: u32, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let [a, b] = load_data(data)?;
    let sizes = [sample[0].unwrap_or(a.records.len()), sample[1].unwrap_or(b.records.len())];
    let config = SessionConfig::new(rounds, sizes[0], sizes[1]).with_seed(resolve_seed(seed));
    let session = Session::new(config, a.to_dataset(), b.to_dataset())?;
    session.save(out)?;
    println!("wrote {} ({} x {} pairs, key {})", out.display(), sizes[0], sizes[1], session.key_fingerprint());
    Ok(())
}

fn check(file: &Path) -> Result<(), CliError> {
    let source = std::fs::read_to_string(file)?;
    match dsl::parse_with_warnings(&source) {
        Ok((program, warnings)) => {
            for w in &warnings {
                println!("{}:{w}", file.display());
            }
            print!("{}", dsl::pretty(&program));
            Ok(())
        }
        Err(diagnostics) => {
            for d in &diagnostics {
                eprintln!("{}:{d}", file.display());
            }
            Err(CliError::Diagnostics(diagnostics.iter().filter(|d| d.is_error()).count()))
        }
    }
}

fn manifest() -> Result<(), CliError> {
    let registry = blindanno::interp::FunctionRegistry::<blindanno::crypto::Evaluator>::builtins();
    let doc = serde_json::json!({
        "functions": registry.manifest(),
        "tokens": dsl::token_manifest(),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

async fn serve(args: ServeArgs) -> Result<(), CliError> {
    let session = Session::load(&args.session)?;
    let tokens = Tokens::generate();
    let json = serde_json::to_string_pretty(&tokens)?;
    if let Some(path) = &args.tokens_out {
        std::fs::write(path, &json)?;
    }
    println!("{json}");
    let state = AppState::new(
        session,
        tokens,
        ServiceOptions {
            dataset_names: [args.name_a, args.name_b],
            path: Some(args.session.clone()),
        },
    );
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[tokio::main]
async fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve(args) => serve(args).await,
        Command::Bench(BenchCommand::Run {
            data,
            gold,
            matches,
            rounds,
            seed,
            out,
        }) => bench_run(&data, &gold, matches, rounds, seed, &out),
        Command::Session(SessionCommand::Init {
            data,
            sample_a,
            sample_b,
            rounds,
            seed,
            out,
        }) => session_init(&data, [sample_a, sample_b], rounds, seed, &out),
        Command::Check { file } => check(&file),
        Command::Manifest => manifest(),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
