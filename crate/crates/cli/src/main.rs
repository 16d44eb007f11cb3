use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand};
use ragsearch::eval::{ReportFormat, DEFAULT_EVAL_K};
use ragsearch::ingest::Sample;
use ragsearch::scoring::{Bm25Params, CompositeWeights};
use ragsearch::{load, IndexSnapshot};
use ragsearch_cli::commands::{
    parse_scorer_list, run_build, run_context, run_eval, run_search, BuildOptions, ContextRequest,
    SearchRequest, DEFAULT_BUDGET, DEFAULT_K,
};
use ragsearch_cli::service::{serve_on, shutdown_signal, AppState, ServiceConfig, DEFAULT_BIND};

const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "ragsearch",
    version,
    about = "Lexical retrieval and context assembly over SQuAD-style corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a SQuAD JSON file and write an index.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Index a seeded uniform sample of N paragraphs.
        #[arg(long, value_name = "N")]
        sample: Option<usize>,
        #[arg(long, value_name = "S", default_value_t = DEFAULT_SEED, requires = "sample")]
        seed: u64,
        /// One stopword per line; `#` starts a comment.
        #[arg(long, value_name = "FILE")]
        stopwords: Option<PathBuf>,
        /// Also index article titles.
        #[arg(long)]
        index_titles: bool,
    },
    /// Rank documents for one query.
    Search {
        #[command(flatten)]
        query: QueryArgs,
    },
    /// Search, then pack the hits into an LLM context under a token budget.
    Context {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u32,
    },
    /// Macro-averaged precision, recall and F1 per scorer.
    Eval {
        #[arg(long)]
        index: PathBuf,
        /// SQuAD JSON whose questions are run against the index.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value = "baseline,bm25,tfidf,composite")]
        scorers: String,
        #[arg(long, default_value_t = DEFAULT_EVAL_K)]
        k: usize,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Serve /healthz, /search and /context over HTTP.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: String,
        /// Scorer used when a request names none.
        #[arg(long, default_value = "bm25")]
        scorer: String,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value = "bm25")]
    scorer: String,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Debug, Args)]
struct ScoringArgs {
    #[arg(long, default_value_t = Bm25Params::DEFAULT_K1)]
    k1: f64,
    #[arg(long, default_value_t = Bm25Params::DEFAULT_B)]
    b: f64,
    /// Composite weights, e.g. `cosine_tfidf=0.5,bm25=0.5`.
    #[arg(long, default_value = "cosine_tfidf=0.5,bm25=0.5")]
    weights: String,
    /// Combine raw metric values instead of min-max normalized ones.
    #[arg(long)]
    raw_metrics: bool,
}

impl ScoringArgs {
    fn resolve(&self) -> anyhow::Result<(Bm25Params, CompositeWeights)> {
        let bm25 = Bm25Params::new(self.k1, self.b)?;
        let weights = CompositeWeights::parse(&self.weights, !self.raw_metrics)?;
        Ok((bm25, weights))
    }
}

impl QueryArgs {
    fn request(&self) -> anyhow::Result<SearchRequest> {
        let (bm25, composite) = self.scoring.resolve()?;
        Ok(SearchRequest {
            query: self.query.clone(),
            k: self.k,
            scorer: SearchRequest::scorer_from_name(&self.scorer, &composite)?,
            bm25,
        })
    }
}

fn open_index(path: &Path) -> anyhow::Result<IndexSnapshot> {
    if !path.exists() {
        bail!("index not found: {}", path.display());
    }
    load(path).with_context(|| format!("loading index {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Build {
            input,
            out,
            sample,
            seed,
            stopwords,
            index_titles,
        } => {
            let options = BuildOptions {
                stopwords: stopwords.as_deref(),
                sample: sample.map(|n_paragraphs| Sample { n_paragraphs, seed }),
                index_titles,
            };
            let summary = run_build(&input, &out, &options)
                .with_context(|| format!("building from {}", input.display()))?;
            log::info!("wrote {} documents to {}", summary.n_docs, out.display());
            print_json(&summary)
        }
        Command::Search { query } => {
            let snapshot = open_index(&query.index)?;
            print_json(&run_search(&snapshot, &query.request()?)?)
        }
        Command::Context { query, budget } => {
            let snapshot = open_index(&query.index)?;
            let request = ContextRequest {
                search: query.request()?,
                token_budget: budget,
            };
            print_json(&run_context(&snapshot, &request)?)
        }
        Command::Eval {
            index,
            queries,
            scorers,
            k,
            format,
            out,
            scoring,
        } => {
            let snapshot = open_index(&index)?;
            let (bm25, composite) = scoring.resolve()?;
            let scorers = parse_scorer_list(&scorers, bm25, &composite)?;
            let json = std::fs::read_to_string(&queries)
                .with_context(|| format!("reading {}", queries.display()))?;
            let outcome = run_eval(&snapshot, &json, &scorers, k, format)?;
            if outcome.n_queries_dropped > 0 {
                eprintln!(
                    "skipped {} questions whose paragraph is not in the index",
                    outcome.n_queries_dropped
                );
            }
            for (result, empty) in outcome.results.iter().zip(&outcome.n_empty_queries) {
                if *empty > 0 {
                    eprintln!(
                        "{}: {} questions analyzed to no terms and scored 0",
                        result.scorer_name, empty
                    );
                }
            }
            match out {
                Some(path) => std::fs::write(&path, &outcome.report)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", outcome.report),
            }
            Ok(())
        }
        Command::Serve {
            index,
            bind,
            scorer,
            k,
            scoring,
        } => {
            let (bm25, composite) = scoring.resolve()?;
            let bind_address: SocketAddr = bind
                .parse()
                .with_context(|| format!("invalid bind address {bind}"))?;
            if k == 0 {
                bail!("--k must be positive");
            }
            let config = ServiceConfig {
                index_path: index.clone(),
                bind_address,
                default_scorer: SearchRequest::scorer_from_name(&scorer, &composite)?,
                default_k: k,
                bm25,
                composite,
            };
            let snapshot = open_index(&index)?;
            let state = AppState::new(snapshot, config);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(bind_address)
                    .await
                    .with_context(|| format!("binding {bind_address}"))?;
                log::info!(
                    "serving {} documents on http://{}",
                    state.snapshot.n_docs(),
                    listener.local_addr()?
                );
                serve_on(listener, state, shutdown_signal()).await?;
                Ok(())
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RAGSEARCH_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
