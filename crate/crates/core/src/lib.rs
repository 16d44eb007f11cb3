//! Embeddable full-text retrieval for retrieval-augmented generation.
//!
//! Documents pass through an [`analysis`] pipeline into an inverted
//! [`index`]; queries are ranked by TF-IDF cosine, BM25, or a weighted
//! composite of both ([`scoring`], [`retrieval`]), and the top hits can be
//! packed into a token-budgeted prompt context ([`context`]). [`ingest`]
//! reads SQuAD 2.0 files and [`eval`] measures retrieval quality against
//! relevance judgments.

pub mod analysis;
pub mod context;
pub mod error;
pub mod eval;
pub mod index;
pub mod ingest;
pub mod persist;
pub mod retrieval;
pub mod scoring;

pub use analysis::{analyze, AnalyzerConfig, Term};
pub use context::{assemble_context, ContextBundle};
pub use error::{Error, Result};
pub use eval::{emit_report, evaluate_run, precision_recall_f1, EvalResult, Qrels, ReportFormat};
pub use index::{DocumentId, IndexBuilder, IndexOptions, IndexSnapshot};
pub use ingest::{build_benchmark_index, parse_squad, IngestOutput, Sample};
pub use persist::{load, persist};
pub use retrieval::{search, RankedList, ScoredHit, ScorerConfig, ScorerKind};
pub use scoring::{Bm25Params, CompositeWeights, MetricId};
