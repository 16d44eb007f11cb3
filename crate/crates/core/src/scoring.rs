//! Relevance scoring: IDF, TF-IDF vectors with cosine similarity, a BM25
//! score with document-length normalization, and a weighted composite of
//! both.
//!
//! All logarithms are natural logs. Every function here is pure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::Term;
use crate::error::{Error, Result};
use crate::index::{DocumentId, IndexSnapshot};

/// `ln(n_docs / df)`, or 0 for a term that occurs nowhere.
pub fn idf(n_docs: u32, df: u32) -> Result<f64> {
    if df > n_docs {
        return Err(Error::Domain(format!("df {df} exceeds n_docs {n_docs}")));
    }
    if df == 0 {
        return Ok(0.0);
    }
    Ok((f64::from(n_docs) / f64::from(df)).ln())
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, the smoothed form used by most
/// BM25 implementations. Never negative.
pub fn smoothed_idf(n_docs: u32, df: u32) -> Result<f64> {
    if df > n_docs {
        return Err(Error::Domain(format!("df {df} exceeds n_docs {n_docs}")));
    }
    if df == 0 {
        return Ok(0.0);
    }
    let n = f64::from(n_docs);
    let df = f64::from(df);
    Ok((1.0 + (n - df + 0.5) / (df + 0.5)).ln())
}

pub fn tfidf_weight(tf: u32, idf: f64) -> f64 {
    f64::from(tf) * idf
}

/// Sparse term-weight vector. Zero weights are never stored, and entries are
/// kept in term order so sums are reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: BTreeMap<Term, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: Term, weight: f64) {
        if weight == 0.0 {
            self.entries.remove(&term);
        } else {
            self.entries.insert(term, weight);
        }
    }

    pub fn get(&self, term: &str) -> f64 {
        self.entries.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, f64)> {
        self.entries.iter().map(|(t, w)| (t, *w))
    }

    pub fn norm(&self) -> f64 {
        let mut sum = 0.0;
        for weight in self.entries.values() {
            sum += weight * weight;
        }
        sum.sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut dot = 0.0;
        // the intersection is visited in ascending term order either way
        for (term, weight) in &small.entries {
            if let Some(w) = large.entries.get(term) {
                dot += weight * w;
            }
        }
        dot
    }
}

impl FromIterator<(Term, f64)> for SparseVector {
    fn from_iter<I: IntoIterator<Item = (Term, f64)>>(iter: I) -> Self {
        let mut v = SparseVector::new();
        for (term, weight) in iter {
            v.insert(term, weight);
        }
        v
    }
}

/// TF-IDF vector for a bag of terms against the snapshot's corpus
/// statistics. Terms with idf 0 (absent, or present in every document)
/// drop out.
pub fn tfidf_vector(
    snapshot: &IndexSnapshot,
    term_frequencies: &BTreeMap<Term, u32>,
) -> SparseVector {
    let stats = snapshot.stats();
    term_frequencies
        .iter()
        .map(|(term, &tf)| {
            let idf = idf(stats.n_docs, stats.df(term.as_str())).unwrap_or(0.0);
            (term.clone(), tfidf_weight(tf, idf))
        })
        .collect()
}

/// Cosine of the angle between two vectors; 0 if either is empty.
pub fn cosine_similarity(a: &SparseVector, b: &SparseVector) -> f64 {
    let norm_a = a.norm();
    let norm_b = b.norm();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    cosine_from_parts(a.dot(b), norm_a, norm_b)
}

/// Final division shared by the vector route and the postings route.
pub(crate) fn cosine_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    dot / (norm_a * norm_b)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdfVariant {
    /// `ln(N/df)`, the same IDF used by TF-IDF.
    #[default]
    Plain,
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    #[serde(default)]
    pub idf_variant: IdfVariant,
}

impl Bm25Params {
    pub const DEFAULT_K1: f64 = 1.2;
    pub const DEFAULT_B: f64 = 0.75;

    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1.is_finite() && k1 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "k1 must be finite and >= 0, got {k1}"
            )));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidParams(format!(
                "b must lie in [0, 1], got {b}"
            )));
        }
        Ok(Bm25Params {
            k1,
            b,
            idf_variant: IdfVariant::Plain,
        })
    }

    pub fn with_idf_variant(mut self, variant: IdfVariant) -> Self {
        self.idf_variant = variant;
        self
    }

    pub fn idf(&self, n_docs: u32, df: u32) -> Result<f64> {
        match self.idf_variant {
            IdfVariant::Plain => idf(n_docs, df),
            IdfVariant::Smoothed => smoothed_idf(n_docs, df),
        }
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: Self::DEFAULT_K1,
            b: Self::DEFAULT_B,
            idf_variant: IdfVariant::Plain,
        }
    }
}

/// `k1 * ((1 - b) + b * doc_len / avgdl)`.
pub fn bm25_length_norm(params: &Bm25Params, doc_len: u32, avgdl: f64) -> Result<f64> {
    if avgdl.is_nan() || avgdl <= 0.0 {
        return Err(Error::Domain(format!(
            "avgdl must be positive, got {avgdl}"
        )));
    }
    Ok(params.k1 * ((1.0 - params.b) + params.b * f64::from(doc_len) / avgdl))
}

/// One query term's contribution, for a term present `tf >= 1` times.
pub(crate) fn bm25_term_score(params: &Bm25Params, idf: f64, tf: u32, length_norm: f64) -> f64 {
    let f = f64::from(tf);
    idf * ((params.k1 + 1.0) * f) / (length_norm + f)
}

/// Distinct query terms in ascending order.
pub(crate) fn distinct_terms(terms: &[Term]) -> Vec<&Term> {
    terms.iter().collect::<BTreeSet<_>>().into_iter().collect()
}

/// BM25 score of one document. Repeated query terms count once.
pub fn bm25_score(
    snapshot: &IndexSnapshot,
    query_terms: &[Term],
    doc_id: DocumentId,
    params: &Bm25Params,
) -> Result<f64> {
    let doc = snapshot.document(doc_id)?;
    let stats = snapshot.stats();
    let mut length_norm = None;
    let mut score = 0.0;
    for term in distinct_terms(query_terms) {
        let Some(list) = snapshot.postings(term.as_str()) else {
            continue;
        };
        let tf = list.term_frequency(doc_id);
        if tf == 0 {
            continue;
        }
        let norm = match length_norm {
            Some(norm) => norm,
            None => *length_norm.insert(bm25_length_norm(params, doc.length_tokens, stats.avgdl)?),
        };
        let idf = params.idf(stats.n_docs, list.document_frequency())?;
        score += bm25_term_score(params, idf, tf, norm);
    }
    Ok(score)
}

/// Cosine similarity between the query's and the document's TF-IDF vectors.
pub fn tfidf_cosine_score(
    snapshot: &IndexSnapshot,
    query_terms: &[Term],
    doc_id: DocumentId,
) -> Result<f64> {
    let doc_vector = tfidf_vector(snapshot, &snapshot.document_terms(doc_id)?);
    let query_vector = tfidf_vector(
        snapshot,
        &crate::index::term_counts(query_terms.iter().cloned()),
    );
    Ok(cosine_similarity(&query_vector, &doc_vector))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    CosineTfidf,
    Bm25,
}

impl MetricId {
    pub const ALL: [MetricId; 2] = [MetricId::CosineTfidf, MetricId::Bm25];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::CosineTfidf => "cosine_tfidf",
            MetricId::Bm25 => "bm25",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine_tfidf" | "cosine" | "tfidf" => Ok(MetricId::CosineTfidf),
            "bm25" => Ok(MetricId::Bm25),
            other => Err(Error::InvalidParams(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub weights: Vec<(MetricId, f64)>,
    /// Min-max rescale each metric over the candidate set before weighting.
    pub normalize_metrics: bool,
}

impl CompositeWeights {
    pub fn new(weights: Vec<(MetricId, f64)>, normalize_metrics: bool) -> Result<Self> {
        if weights.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParams(
                "composite weights must be finite and >= 0".into(),
            ));
        }
        if !weights.iter().any(|(_, w)| *w > 0.0) {
            return Err(Error::InvalidParams(
                "at least one composite weight must be positive".into(),
            ));
        }
        Ok(CompositeWeights {
            weights,
            normalize_metrics,
        })
    }

    /// Parses `cosine_tfidf=0.5,bm25=0.5`.
    pub fn parse(text: &str, normalize_metrics: bool) -> Result<Self> {
        let weights = text
            .split(',')
            .filter(|part| !part.trim().is_empty())
            .map(|part| {
                let (name, value) = part.split_once('=').ok_or_else(|| {
                    Error::InvalidParams(format!("expected metric=weight, got {part:?}"))
                })?;
                let weight = value
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParams(format!("bad weight {value:?}: {e}")))?;
                Ok((name.trim().parse::<MetricId>()?, weight))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights, normalize_metrics)
    }

    pub fn metrics(&self) -> impl Iterator<Item = MetricId> + '_ {
        self.weights.iter().map(|(m, _)| *m)
    }
}

impl Default for CompositeWeights {
    fn default() -> Self {
        CompositeWeights {
            weights: vec![(MetricId::CosineTfidf, 0.5), (MetricId::Bm25, 0.5)],
            normalize_metrics: true,
        }
    }
}

/// `Σ w_j * v_j` over the configured metrics. Values are used as given; see
/// [`composite_scores`] for the normalizing variant over a candidate set.
pub fn composite_score(
    metric_values: &[(MetricId, f64)],
    weights: &CompositeWeights,
) -> Result<f64> {
    let mut score = 0.0;
    for (metric, weight) in &weights.weights {
        let value = metric_values
            .iter()
            .find(|(m, _)| m == metric)
            .map(|(_, v)| *v)
            .ok_or(Error::MissingMetric(*metric))?;
        score += weight * value;
    }
    Ok(score)
}

/// Rescales to `[0, 1]`; a constant column maps to all zeros.
pub fn min_max_normalize(values: &mut [f64]) {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    let range = max - min;
    for v in values.iter_mut() {
        *v = if range > 0.0 { (*v - min) / range } else { 0.0 };
    }
}

/// Composite scores for a whole candidate set. `columns` holds one value
/// vector per metric, all the same length, each aligned with the candidates.
pub fn composite_scores(
    columns: &[(MetricId, Vec<f64>)],
    weights: &CompositeWeights,
) -> Result<Vec<f64>> {
    let len = columns.first().map_or(0, |(_, c)| c.len());
    let mut prepared = Vec::with_capacity(weights.weights.len());
    for (metric, weight) in &weights.weights {
        let column = columns
            .iter()
            .find(|(m, _)| m == metric)
            .map(|(_, c)| c)
            .ok_or(Error::MissingMetric(*metric))?;
        if column.len() != len {
            return Err(Error::InvalidParams(
                "metric columns differ in length".into(),
            ));
        }
        let mut column = column.clone();
        if weights.normalize_metrics {
            min_max_normalize(&mut column);
        }
        prepared.push((*weight, column));
    }
    Ok((0..len)
        .map(|i| {
            let mut score = 0.0;
            for (weight, column) in &prepared {
                score += weight * column[i];
            }
            score
        })
        .collect())
}
