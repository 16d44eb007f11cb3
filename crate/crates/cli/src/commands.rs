use std::path::Path;

use ragsearch::analysis::{load_stopwords, AnalyzerConfig};
use ragsearch::context::{assemble_context, ContextBundle};
use ragsearch::eval::{emit_report, evaluate_run, EvalResult, ReportFormat};
use ragsearch::index::{IndexOptions, IndexSnapshot};
use ragsearch::ingest::{
    build_benchmark_index, parse_squad, retain_indexed_queries, IngestStats, Sample,
};
use ragsearch::retrieval::{search, ScorerConfig, ScorerKind};
use ragsearch::scoring::{Bm25Params, CompositeWeights};
use ragsearch::{persist, Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_BUDGET: u32 = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub rank: usize,
    pub external_id: String,
    pub title: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub scorer: String,
    pub k: usize,
    pub hits: Vec<SearchHit>,
}

/// A search as requested by either surface. `scorer` names one of
/// `bm25`, `tfidf`, `composite`, `baseline`.
#[derive(Debug, Clone)]
pub struct SearchRequest {
    pub query: String,
    pub k: usize,
    pub scorer: ScorerKind,
    pub bm25: Bm25Params,
}

impl SearchRequest {
    /// Resolves a scorer name; `composite` takes the supplied weights.
    pub fn scorer_from_name(name: &str, composite: &CompositeWeights) -> Result<ScorerKind> {
        Ok(match name.parse::<ScorerKind>()? {
            ScorerKind::Composite(_) => ScorerKind::Composite(composite.clone()),
            other => other,
        })
    }

    fn config(&self) -> ScorerConfig {
        ScorerConfig::new(self.scorer.clone()).with_bm25(self.bm25)
    }
}

pub fn run_search(snapshot: &IndexSnapshot, request: &SearchRequest) -> Result<SearchResponse> {
    let config = request.config();
    let list = search(snapshot, &request.query, &config, request.k)?;
    let hits = list
        .hits
        .iter()
        .enumerate()
        .map(|(i, hit)| {
            let doc = snapshot.document(hit.doc_id)?;
            Ok(SearchHit {
                rank: i + 1,
                external_id: hit.external_id.clone(),
                title: doc.title.clone(),
                score: hit.score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchResponse {
        query: request.query.clone(),
        scorer: config.name().to_owned(),
        k: request.k,
        hits,
    })
}

#[derive(Debug, Clone)]
pub struct ContextRequest {
    pub search: SearchRequest,
    pub token_budget: u32,
}

pub fn run_context(snapshot: &IndexSnapshot, request: &ContextRequest) -> Result<ContextBundle> {
    let list = search(
        snapshot,
        &request.search.query,
        &request.search.config(),
        request.search.k,
    )?;
    assemble_context(&request.search.query, &list, snapshot, request.token_budget)
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildSummary {
    #[serde(flatten)]
    pub ingest: IngestStats,
    pub n_docs: u32,
    pub avgdl: f64,
    pub n_terms: usize,
    pub n_queries_indexed: usize,
    pub n_queries_dropped: usize,
}

pub struct BuildOptions<'a> {
    pub stopwords: Option<&'a Path>,
    pub sample: Option<Sample>,
    pub index_titles: bool,
}

pub fn run_build(input: &Path, out: &Path, options: &BuildOptions<'_>) -> Result<BuildSummary> {
    let text = std::fs::read_to_string(input)?;
    let output = parse_squad(&text)?;
    let mut analyzer = AnalyzerConfig::default();
    if let Some(path) = options.stopwords {
        analyzer.stopwords = load_stopwords(path)?;
    }
    let bench = build_benchmark_index(
        &output,
        analyzer,
        IndexOptions {
            index_titles: options.index_titles,
        },
        options.sample,
    )?;
    persist(&bench.snapshot, out)?;
    let stats = bench.snapshot.stats();
    Ok(BuildSummary {
        ingest: output.stats,
        n_docs: stats.n_docs,
        avgdl: stats.avgdl,
        n_terms: stats.df.len(),
        n_queries_indexed: bench.queries.len(),
        n_queries_dropped: bench.n_dropped_queries,
    })
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub results: Vec<EvalResult>,
    pub report: String,
    pub n_queries_dropped: usize,
    pub n_empty_queries: Vec<usize>,
}

/// Evaluates each scorer, in the order given, on the questions of a SQuAD
/// file whose source paragraph is present in `snapshot`.
pub fn run_eval(
    snapshot: &IndexSnapshot,
    queries_json: &str,
    scorers: &[ScorerConfig],
    k: usize,
    format: ReportFormat,
) -> Result<EvalOutcome> {
    let output = parse_squad(queries_json)?;
    let (queries, qrels, dropped) =
        retain_indexed_queries(&output, |id| snapshot.document_by_external_id(id).is_some());
    if queries.is_empty() {
        return Err(Error::InvalidParams(
            "none of the questions refer to a paragraph in this index".into(),
        ));
    }
    let pairs: Vec<(&str, &str)> = queries
        .iter()
        .map(|q| (q.query_id.as_str(), q.text.as_str()))
        .collect();
    let mut results = Vec::with_capacity(scorers.len());
    let mut empties = Vec::with_capacity(scorers.len());
    for scorer in scorers {
        let run = evaluate_run(snapshot, &pairs, &qrels, scorer, k)?;
        empties.push(run.n_empty_queries);
        results.push(run.result);
    }
    Ok(EvalOutcome {
        report: emit_report(&results, format),
        results,
        n_queries_dropped: dropped,
        n_empty_queries: empties,
    })
}

/// Parses `bm25,tfidf,composite,baseline` into scorer configs sharing the
/// same BM25 parameters and composite weights.
pub fn parse_scorer_list(
    list: &str,
    bm25: Bm25Params,
    composite: &CompositeWeights,
) -> Result<Vec<ScorerConfig>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|name| {
            Ok(
                ScorerConfig::new(SearchRequest::scorer_from_name(name, composite)?)
                    .with_bm25(bm25),
            )
        })
        .collect()
}
