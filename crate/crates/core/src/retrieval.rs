//! Query execution: analyze, collect candidates from postings, score, and
//! select the top k.
//!
//! Only documents sharing at least one term with the query are scored. For
//! BM25 and TF-IDF cosine every other document scores exactly 0, so the
//! pruning never changes which positive-scoring documents come back.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::Term;
use crate::error::{Error, Result};
use crate::index::{term_counts, DocumentId, IndexSnapshot};
use crate::scoring::{
    self, bm25_length_norm, bm25_term_score, composite_scores, cosine_from_parts, tfidf_vector,
    Bm25Params, CompositeWeights, MetricId,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub raw: String,
    pub terms: Vec<Term>,
    pub query_id: Option<String>,
}

impl Query {
    pub fn parse(snapshot: &IndexSnapshot, raw: &str) -> Self {
        Query {
            raw: raw.to_owned(),
            terms: snapshot.analyzer().analyze(raw),
            query_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub doc_id: DocumentId,
    pub external_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub hits: Vec<ScoredHit>,
    pub top_k_count: usize,
}

impl RankedList {
    pub fn external_ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.external_id.as_str())
    }
}

/// Which ranking function a search uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Metric(MetricId),
    Composite(CompositeWeights),
    /// Unscored candidates in doc id order; a naive reference point for
    /// evaluation. Every hit carries score 0.
    Baseline,
}

impl ScorerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerKind::Metric(MetricId::Bm25) => "bm25",
            ScorerKind::Metric(MetricId::CosineTfidf) => "tfidf",
            ScorerKind::Composite(_) => "composite",
            ScorerKind::Baseline => "baseline",
        }
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    /// Accepts `bm25`, `tfidf`, `composite` (default weights) and `baseline`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bm25" => Ok(ScorerKind::Metric(MetricId::Bm25)),
            "tfidf" | "cosine" | "cosine_tfidf" => Ok(ScorerKind::Metric(MetricId::CosineTfidf)),
            "composite" => Ok(ScorerKind::Composite(CompositeWeights::default())),
            "baseline" => Ok(ScorerKind::Baseline),
            other => Err(Error::InvalidParams(format!(
                "unknown scorer {other:?} (expected bm25, tfidf, composite or baseline)"
            ))),
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    pub bm25: Bm25Params,
}

impl ScorerConfig {
    pub fn new(kind: ScorerKind) -> Self {
        ScorerConfig {
            kind,
            bm25: Bm25Params::default(),
        }
    }

    pub fn bm25() -> Self {
        Self::new(ScorerKind::Metric(MetricId::Bm25))
    }

    pub fn tfidf() -> Self {
        Self::new(ScorerKind::Metric(MetricId::CosineTfidf))
    }

    pub fn composite(weights: CompositeWeights) -> Self {
        Self::new(ScorerKind::Composite(weights))
    }

    pub fn baseline() -> Self {
        Self::new(ScorerKind::Baseline)
    }

    pub fn with_bm25(mut self, params: Bm25Params) -> Self {
        self.bm25 = params;
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

/// Documents containing at least one of `terms`.
pub fn candidates(snapshot: &IndexSnapshot, terms: &[Term]) -> BTreeSet<DocumentId> {
    terms
        .iter()
        .filter_map(|t| snapshot.postings(t.as_str()))
        .flat_map(|list| list.postings.iter().map(|p| p.doc_id))
        .collect()
}

/// Heap entry ordered so that the "best" hit is the greatest: higher score
/// first, then lower doc id.
struct Ranked(ScoredHit);

impl Ranked {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.0
            .score
            .total_cmp(&other.0.score)
            .then_with(|| other.0.doc_id.cmp(&self.0.doc_id))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Ordering of a ranked list: score descending, then doc id ascending.
pub fn rank_order(a: &ScoredHit, b: &ScoredHit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// The `k` best hits in rank order, kept in a bounded min-heap.
pub fn top_k(scored: impl IntoIterator<Item = ScoredHit>, k: usize) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    let mut heap: BinaryHeap<Reverse<Ranked>> = BinaryHeap::with_capacity(k + 1);
    for hit in scored {
        let entry = Ranked(hit);
        if heap.len() < k {
            heap.push(Reverse(entry));
        } else if let Some(mut worst) = heap.peek_mut() {
            if entry > worst.0 {
                worst.0 = entry;
            }
        }
    }
    // ascending order of Reverse<Ranked> is best-first
    let hits = heap
        .into_sorted_vec()
        .into_iter()
        .map(|Reverse(r)| r.0)
        .collect();
    Ok(RankedList {
        hits,
        top_k_count: k,
    })
}

/// Scores of every candidate under one metric, aligned with `candidates`.
///
/// Contributions are accumulated term by term in ascending term order,
/// which is the same order the per-document functions in
/// [`crate::scoring`] use, so both routes give bit-identical scores.
pub fn metric_scores(
    snapshot: &IndexSnapshot,
    terms: &[Term],
    candidates: &[DocumentId],
    metric: MetricId,
    bm25: &Bm25Params,
) -> Result<Vec<f64>> {
    let mut slot = vec![usize::MAX; snapshot.documents().len()];
    for (i, doc_id) in candidates.iter().enumerate() {
        slot[doc_id.index()] = i;
    }
    let stats = snapshot.stats();
    let mut acc = vec![0.0f64; candidates.len()];

    match metric {
        MetricId::Bm25 => {
            let mut norms = Vec::with_capacity(candidates.len());
            for doc_id in candidates {
                let doc = snapshot.document(*doc_id)?;
                norms.push(bm25_length_norm(bm25, doc.length_tokens, stats.avgdl)?);
            }
            for term in scoring::distinct_terms(terms) {
                let Some(list) = snapshot.postings(term.as_str()) else {
                    continue;
                };
                let idf = bm25.idf(stats.n_docs, list.document_frequency())?;
                for posting in &list.postings {
                    let i = slot[posting.doc_id.index()];
                    if i != usize::MAX {
                        acc[i] += bm25_term_score(bm25, idf, posting.term_frequency, norms[i]);
                    }
                }
            }
        }
        MetricId::CosineTfidf => {
            let query_vector = tfidf_vector(snapshot, &term_counts(terms.iter().cloned()));
            let query_norm = query_vector.norm();
            if query_norm == 0.0 {
                return Ok(acc);
            }
            for (term, query_weight) in query_vector.iter() {
                let Some(list) = snapshot.postings(term.as_str()) else {
                    continue;
                };
                let idf = scoring::idf(stats.n_docs, list.document_frequency())?;
                for posting in &list.postings {
                    let i = slot[posting.doc_id.index()];
                    if i != usize::MAX {
                        acc[i] += query_weight * scoring::tfidf_weight(posting.term_frequency, idf);
                    }
                }
            }
            for (score, doc_id) in acc.iter_mut().zip(candidates) {
                let doc_norm = snapshot.tfidf_norm(*doc_id);
                *score = if doc_norm == 0.0 {
                    0.0
                } else {
                    cosine_from_parts(*score, query_norm, doc_norm)
                };
            }
        }
    }
    Ok(acc)
}

/// Scores an explicit candidate list with the configured scorer. Composite
/// normalization is computed over exactly this list.
pub fn score_candidates(
    snapshot: &IndexSnapshot,
    terms: &[Term],
    candidates: &[DocumentId],
    scorer: &ScorerConfig,
) -> Result<Vec<f64>> {
    match &scorer.kind {
        ScorerKind::Metric(metric) => {
            metric_scores(snapshot, terms, candidates, *metric, &scorer.bm25)
        }
        ScorerKind::Composite(weights) => {
            let metrics: BTreeSet<MetricId> = weights.metrics().collect();
            let columns = metrics
                .into_iter()
                .map(|m| {
                    Ok((
                        m,
                        metric_scores(snapshot, terms, candidates, m, &scorer.bm25)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            composite_scores(&columns, weights)
        }
        ScorerKind::Baseline => Ok(vec![0.0; candidates.len()]),
    }
}

pub fn search_terms(
    snapshot: &IndexSnapshot,
    terms: &[Term],
    scorer: &ScorerConfig,
    k: usize,
) -> Result<RankedList> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if terms.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let candidates: Vec<DocumentId> = candidates(snapshot, terms).into_iter().collect();
    let scores = score_candidates(snapshot, terms, &candidates, scorer)?;
    let hits = candidates.iter().zip(scores).map(|(doc_id, score)| {
        debug_assert!(score.is_finite());
        ScoredHit {
            doc_id: *doc_id,
            external_id: snapshot.documents()[doc_id.index()].external_id.clone(),
            score,
        }
    });
    top_k(hits, k)
}

/// Analyzes `raw_query` with the snapshot's analyzer and runs it.
pub fn search(
    snapshot: &IndexSnapshot,
    raw_query: &str,
    scorer: &ScorerConfig,
    k: usize,
) -> Result<RankedList> {
    let query = Query::parse(snapshot, raw_query);
    search_terms(snapshot, &query.terms, scorer, k)
}
