//! `toposearch` command-line tool.
//!
//! Exit status: 0 on success, 1 on usage errors (bad flags or parameter
//! values), 2 on data, format and I/O errors.

mod output;

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use toposearch::api::{self, ApiError, AskRequest, ErrorKind, SearchParams};
use toposearch::config::{EmbedderKind, EngineConfig};
use toposearch::corpus::{ingest_records, load_corpus, save_corpus, ToponymRecord, DEFAULT_MAX_CONTEXT};
use toposearch::engine::{build_index, Engine};
use toposearch::eval::{compare_methods, generate_eval_queries, generate_validation_queries, EvalParams};
use toposearch::hybrid::{grid_search_alpha, Method, SearchQuery, DEFAULT_ALPHA_GRID};
use toposearch::qagen::{
    emit_flat, emit_squad, generate_corpus, load_pairs, split_corpus, DEFAULT_MAX_PER_RECORD, DEFAULT_TRAIN_FRACTION,
};
use toposearch::reader::{evaluate_predictions, evaluate_reader, rule_based};
use toposearch_client::{Client, ClientError};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(
    name = "toposearch",
    version,
    about = "Hybrid geospatial and semantic toponym search"
)]
struct Cli {
    /// TOML config with the engine keys; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate raw JSONL records and write a corpus directory.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode or import document vectors for a corpus directory.
    Index {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        embedder: Option<EmbedderKind>,
        /// Document vectors (TVEC) for the file embedder.
        #[arg(long)]
        vectors: Option<PathBuf>,
        /// Query vectors (TVEC keyed by query text) for the file embedder.
        #[arg(long)]
        query_vectors: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Rank documents for a query.
    Search(SearchArgs),
    /// Retrieve the top hybrid hit and read the answer from it.
    Answer(AnswerArgs),
    /// Print one stored document.
    Doc {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        id: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Generate the QA corpus and its train/validation split.
    GenQa {
        /// Raw JSONL records or a corpus directory.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_val: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_MAX_PER_RECORD)]
        max_per_record: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_CONTEXT)]
        max_context: usize,
        #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
        train_fraction: f64,
        #[arg(long, value_enum, default_value_t = QaFormat::Squad)]
        qa_format: QaFormat,
    },
    /// Compare ranking methods on generated queries.
    EvalRetrieval {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// `all` or a comma-separated list of hybrid, semantic, spatial, bm25.
        #[arg(long, default_value = "all")]
        methods: String,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        radius_m: Option<f64>,
        /// Move each query point up to this many meters from its gold record.
        #[arg(long, default_value_t = 0.0)]
        jitter_m: f64,
        #[arg(long)]
        report: PathBuf,
        /// Per-query JSONL trace for error analysis.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Pick the hybrid weight by mean Recall@5 on validation queries.
    GridSearch {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHA_GRID)]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        n_val: usize,
        /// Size of the test set the validation queries should avoid.
        #[arg(long, default_value_t = 500)]
        n_test: usize,
        #[arg(long)]
        radius_m: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.0)]
        jitter_m: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score the rule-based reader, or a prediction file, on a QA set.
    EvalReader {
        #[arg(long)]
        qa: PathBuf,
        #[arg(long)]
        normalize: bool,
        /// JSON object mapping pair id to predicted answer text.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

/// Where requests go: a running service, or an engine opened in-process.
#[derive(Debug, Args)]
struct Target {
    #[arg(long, conflicts_with = "server")]
    corpus: Option<PathBuf>,
    /// Base URL of a running service, e.g. http://127.0.0.1:8080
    #[arg(long)]
    server: Option<String>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long)]
    query: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lon: Option<f64>,
    #[arg(long)]
    radius_m: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct AnswerArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long)]
    question: String,
    #[arg(long, allow_hyphen_values = true)]
    lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lon: Option<f64>,
    #[arg(long)]
    radius_m: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    /// The service's JSON response body.
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QaFormat {
    Squad,
    Flat,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: toposearch::Error| e.to_string())
}

/// A usage error: the invocation was wrong, not the data.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let api_kind = |e: &ApiError| if e.kind == ErrorKind::BadRequest { 1 } else { 2 };
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<toposearch::Error>() {
            return if e.is_invalid_argument() { 1 } else { 2 };
        }
        if let Some(e) = cause.downcast_ref::<ApiError>() {
            return api_kind(e);
        }
        if let Some(e) = cause.downcast_ref::<ClientError>() {
            return e.api_error().map_or(2, api_kind);
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(api) = e.chain().find_map(api_error_of) {
                for f in &api.fields {
                    eprintln!("  {}: {}", f.field, f.message);
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn api_error_of<'a>(cause: &'a (dyn std::error::Error + 'static)) -> Option<&'a ApiError> {
    cause
        .downcast_ref::<ApiError>()
        .or_else(|| cause.downcast_ref::<ClientError>().and_then(ClientError::api_error))
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => Ok(EngineConfig::load(p)?),
        None => Ok(EngineConfig::default()),
    }
}

fn corpus_dir(flag: Option<PathBuf>, cfg: &EngineConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.corpus.clone())
        .ok_or_else(|| usage("a corpus directory is required (--corpus or `corpus` in the config)"))
}

fn open_engine(dir: &Path, cfg: &EngineConfig) -> Result<Engine> {
    cfg.check_paths()?;
    Engine::open(dir, cfg).with_context(|| format!("cannot open corpus {}", dir.display()))
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

enum Backend {
    Local(Box<Engine>),
    Remote(Client, tokio::runtime::Runtime),
}

impl Backend {
    fn connect(target: Target, cfg: &EngineConfig) -> Result<Self> {
        match target.server {
            Some(url) => Ok(Backend::Remote(
                Client::new(&url).map_err(|e| usage(e.to_string()))?,
                runtime()?,
            )),
            None => {
                let dir = corpus_dir(target.corpus, cfg)?;
                Ok(Backend::Local(Box::new(open_engine(&dir, cfg)?)))
            }
        }
    }

    fn search(&self, p: &SearchParams) -> Result<api::SearchResponse> {
        Ok(match self {
            Backend::Local(e) => api::search(e, p)?,
            Backend::Remote(c, rt) => rt.block_on(c.search(p))?,
        })
    }

    fn ask(&self, req: &AskRequest) -> Result<api::AskResponse> {
        Ok(match self {
            Backend::Local(e) => api::ask(e, req)?,
            Backend::Remote(c, rt) => rt.block_on(c.ask(req))?,
        })
    }

    fn doc(&self, id: &str) -> Result<api::DocResponse> {
        Ok(match self {
            Backend::Local(e) => api::doc(e, id)?,
            Backend::Remote(c, rt) => rt.block_on(c.doc(id))?,
        })
    }
}

fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    if spec.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: Method = part.parse().map_err(|e: toposearch::Error| usage(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        bail!(usage("--methods lists no method"));
    }
    Ok(out)
}

/// Records from either a corpus directory or a raw JSONL file.
fn read_records(input: &Path) -> Result<Vec<ToponymRecord>> {
    if input.is_dir() {
        return Ok(load_corpus(input)?.0);
    }
    let file = File::open(input).with_context(|| format!("cannot open {}", input.display()))?;
    let ingested = ingest_records(BufReader::new(file))?;
    for d in &ingested.diagnostics {
        eprintln!("skipped: {d}");
    }
    Ok(ingested.records)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { input, out } => {
            let file = File::open(&input).with_context(|| format!("cannot open {}", input.display()))?;
            let ingested = ingest_records(BufReader::new(file))?;
            for d in &ingested.diagnostics {
                eprintln!("rejected: {d}");
            }
            if ingested.records.is_empty() {
                bail!(toposearch::Error::Data(format!(
                    "{} holds no valid records",
                    input.display()
                )));
            }
            let manifest = save_corpus(&out, &ingested.records)?;
            println!(
                "ingested {} records ({} with coordinates), rejected {}, into {}",
                manifest.record_count,
                manifest.with_coordinates,
                ingested.diagnostics.len(),
                out.display()
            );
        }

        Command::Index {
            corpus,
            embedder,
            vectors,
            query_vectors,
            dim,
        } => {
            let dir = corpus_dir(corpus, &cfg)?;
            cfg.embedder = embedder.unwrap_or(cfg.embedder);
            cfg.vectors = vectors.or(cfg.vectors);
            cfg.query_vectors = query_vectors.or(cfg.query_vectors);
            cfg.dim = dim.unwrap_or(cfg.dim);
            cfg.validate()?;
            cfg.check_paths()?;
            let m = build_index(&dir, &cfg)?;
            println!(
                "indexed {} documents, dim {}, embedder {:?}",
                m.documents, m.dim, m.embedder
            );
        }

        Command::Search(a) => {
            let backend = Backend::connect(a.target, &cfg)?;
            let params = SearchParams {
                q: a.query,
                lat: a.lat,
                lon: a.lon,
                radius_m: a.radius_m,
                alpha: a.alpha,
                k: a.k,
                method: a.method,
            };
            let resp = backend.search(&params)?;
            match a.format {
                Format::Structured => print_json(&resp)?,
                Format::Text => print!("{}", output::search_table(&resp)),
            }
        }

        Command::Answer(a) => {
            let backend = Backend::connect(a.target, &cfg)?;
            let req = AskRequest {
                question: a.question,
                lat: a.lat,
                lon: a.lon,
                radius_m: a.radius_m,
                alpha: a.alpha,
            };
            let resp = backend.ask(&req)?;
            match a.format {
                Format::Structured => print_json(&resp)?,
                Format::Text => print!("{}", output::answer_text(&resp)),
            }
        }

        Command::Doc { target, id, format } => {
            let resp = Backend::connect(target, &cfg)?.doc(&id)?;
            match format {
                Format::Structured => print_json(&resp)?,
                Format::Text => println!("{}", resp.qa_context),
            }
        }

        Command::GenQa {
            input,
            out_train,
            out_val,
            seed,
            max_per_record,
            max_context,
            train_fraction,
            qa_format,
        } => {
            if !(0.0..=1.0).contains(&train_fraction) {
                bail!(usage(format!(
                    "--train-fraction must be in [0, 1], got {train_fraction}"
                )));
            }
            if max_per_record == 0 || max_context == 0 {
                bail!(usage("--max-per-record and --max-context must be positive"));
            }
            let seed = seed.unwrap_or(cfg.seed);
            let records = read_records(&input)?;
            let pairs = generate_corpus(&records, seed, max_per_record, max_context);
            if pairs.is_empty() {
                bail!(toposearch::Error::Data("no QA pairs could be generated".into()));
            }
            let (train, val) = split_corpus(&pairs, train_fraction, seed)?;
            let emit = match qa_format {
                QaFormat::Squad => emit_squad,
                QaFormat::Flat => emit_flat,
            };
            emit(&train, &out_train)?;
            emit(&val, &out_val)?;
            println!(
                "{} pairs from {} records: {} train, {} validation",
                pairs.len(),
                records.len(),
                train.len(),
                val.len()
            );
        }

        Command::EvalRetrieval {
            corpus,
            n,
            seed,
            methods,
            bootstrap,
            alpha,
            radius_m,
            jitter_m,
            report,
            trace,
        } => {
            let methods = parse_methods(&methods)?;
            let dir = corpus_dir(corpus, &cfg)?;
            let engine = open_engine(&dir, &cfg)?;
            let params = EvalParams {
                alpha: alpha.unwrap_or(cfg.alpha),
                radius_m: radius_m.unwrap_or(cfg.radius_m),
                resamples: bootstrap,
                seed: seed.unwrap_or(cfg.seed),
                ..EvalParams::default()
            };
            let queries = generate_eval_queries(engine.records(), n, params.seed, jitter_m)?;
            let result = compare_methods(&engine.indexes(), &queries, &methods, &params)?;
            write_json(&report, &result)?;
            if let Some(path) = trace {
                let mut body = String::new();
                for t in &result.traces {
                    body += &serde_json::to_string(t)?;
                    body.push('\n');
                }
                std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
            }
            print!("{}", result.to_table());
        }

        Command::GridSearch {
            corpus,
            alphas,
            n_val,
            n_test,
            radius_m,
            seed,
            jitter_m,
            report,
        } => {
            if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
                bail!(usage(format!("--alphas values must be in [0, 1], got {a}")));
            }
            let dir = corpus_dir(corpus, &cfg)?;
            let engine = open_engine(&dir, &cfg)?;
            let radius_m = radius_m.unwrap_or(cfg.radius_m);
            let seed = seed.unwrap_or(cfg.seed);
            let queries = generate_validation_queries(engine.records(), n_val, n_test, seed, jitter_m)?;
            let validation: Vec<(SearchQuery, String)> = queries
                .into_iter()
                .map(|q| {
                    let mut sq = SearchQuery::new(q.query_text);
                    sq.point = q.point;
                    (sq, q.gold_doc_id)
                })
                .collect();
            let result = grid_search_alpha(&engine.indexes(), &validation, &alphas, radius_m)?;
            if let Some(path) = report {
                write_json(&path, &result)?;
            }
            print!("{}", output::grid_table(&result));
        }

        Command::EvalReader {
            qa,
            normalize,
            predictions,
            report,
        } => {
            let pairs = load_pairs(&qa)?;
            let metrics = match predictions {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
                    let preds: HashMap<String, String> = serde_json::from_str(&text)
                        .map_err(|e| toposearch::Error::Format(format!("{}: {e}", path.display())))?;
                    evaluate_predictions(&pairs, &preds, normalize)?
                }
                None => evaluate_reader(&pairs, rule_based, normalize)?,
            };
            write_json(&report, &metrics)?;
            print!("{}", output::reader_table(&metrics));
        }

        Command::Serve { corpus, port, host } => {
            let dir = corpus_dir(corpus, &cfg)?;
            let port = port.unwrap_or(cfg.port);
            let engine = Arc::new(open_engine(&dir, &cfg)?);
            runtime()?.block_on(toposearch_service::serve(engine, SocketAddr::new(host, port)))?;
        }
    }
    Ok(())
}
