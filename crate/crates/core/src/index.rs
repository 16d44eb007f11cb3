//! Build-then-freeze inverted index.
//!
//! [`IndexBuilder`] accumulates documents; [`IndexBuilder::commit`] turns it
//! into an immutable [`IndexSnapshot`] holding postings, stored documents and
//! corpus statistics. Snapshots are never modified afterwards, so they can be
//! shared freely between threads.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalyzerConfig, Term};
use crate::error::{Error, Result};
use crate::scoring;

/// Dense ordinal assigned in insertion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocumentId(pub u32);

impl DocumentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredDocument {
    pub doc_id: DocumentId,
    pub external_id: String,
    pub title: String,
    pub body: String,
    /// Number of analyzed (post-stopword) terms in the indexed text.
    pub length_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc_id: DocumentId,
    pub term_frequency: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostingsList {
    pub term: Term,
    /// Sorted by `doc_id`, strictly increasing.
    pub postings: Vec<Posting>,
}

impl PostingsList {
    pub fn document_frequency(&self) -> u32 {
        self.postings.len() as u32
    }

    pub fn term_frequency(&self, doc_id: DocumentId) -> u32 {
        self.postings
            .binary_search_by_key(&doc_id, |p| p.doc_id)
            .map(|i| self.postings[i].term_frequency)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: u32,
    pub avgdl: f64,
    pub total_length: u64,
    pub df: BTreeMap<Term, u32>,
}

impl CorpusStats {
    pub fn df(&self, term: &str) -> u32 {
        self.df.get(term).copied().unwrap_or(0)
    }
}

/// Options fixed at build time and carried with the snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexOptions {
    /// Index `title` together with `body`. Off by default; titles are
    /// always stored for display either way.
    pub index_titles: bool,
}

#[derive(Debug)]
pub struct IndexBuilder {
    analyzer: AnalyzerConfig,
    options: IndexOptions,
    docs: Vec<StoredDocument>,
    by_external_id: HashMap<String, DocumentId>,
    postings: HashMap<Term, Vec<Posting>>,
}

impl IndexBuilder {
    pub fn new(analyzer: AnalyzerConfig) -> Self {
        Self::with_options(analyzer, IndexOptions::default())
    }

    pub fn with_options(analyzer: AnalyzerConfig, options: IndexOptions) -> Self {
        IndexBuilder {
            analyzer,
            options,
            docs: Vec::new(),
            by_external_id: HashMap::new(),
            postings: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    pub fn add_document(
        &mut self,
        external_id: &str,
        title: &str,
        body: &str,
    ) -> Result<DocumentId> {
        if self.by_external_id.contains_key(external_id) {
            return Err(Error::DuplicateExternalId(external_id.to_owned()));
        }
        let doc_id =
            DocumentId(u32::try_from(self.docs.len()).map_err(|_| {
                Error::InvalidParams("index is limited to u32::MAX documents".into())
            })?);

        let terms = indexed_terms(&self.analyzer, &self.options, title, body);
        let mut counts: HashMap<Term, u32> = HashMap::new();
        for term in &terms {
            *counts.entry(term.clone()).or_default() += 1;
        }
        for (term, term_frequency) in counts {
            self.postings.entry(term).or_default().push(Posting {
                doc_id,
                term_frequency,
            });
        }

        self.by_external_id.insert(external_id.to_owned(), doc_id);
        self.docs.push(StoredDocument {
            doc_id,
            external_id: external_id.to_owned(),
            title: title.to_owned(),
            body: body.to_owned(),
            length_tokens: terms.len() as u32,
        });
        Ok(doc_id)
    }

    pub fn commit(self) -> IndexSnapshot {
        let postings = self
            .postings
            .into_iter()
            .map(|(term, postings)| {
                // ids are handed out in increasing order, so each list is
                // already sorted
                debug_assert!(postings.windows(2).all(|w| w[0].doc_id < w[1].doc_id));
                (term.clone(), PostingsList { term, postings })
            })
            .collect();
        IndexSnapshot::from_parts(self.analyzer, self.options, self.docs, postings)
    }
}

fn indexed_terms(
    analyzer: &AnalyzerConfig,
    options: &IndexOptions,
    title: &str,
    body: &str,
) -> Vec<Term> {
    if options.index_titles {
        let mut terms = analyzer.analyze(title);
        terms.extend(analyzer.analyze(body));
        terms
    } else {
        analyzer.analyze(body)
    }
}

/// Immutable committed index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSnapshot {
    analyzer: AnalyzerConfig,
    options: IndexOptions,
    docs: Vec<StoredDocument>,
    postings: BTreeMap<Term, PostingsList>,
    stats: CorpusStats,
    by_external_id: HashMap<String, DocumentId>,
    /// Euclidean norm of each document's TF-IDF vector, indexed by doc id.
    tfidf_norms: Vec<f64>,
}

impl IndexSnapshot {
    /// Assembles a snapshot and derives statistics and norms. `postings`
    /// lists must be sorted by doc id.
    pub(crate) fn from_parts(
        analyzer: AnalyzerConfig,
        options: IndexOptions,
        docs: Vec<StoredDocument>,
        postings: BTreeMap<Term, PostingsList>,
    ) -> Self {
        let n_docs = docs.len() as u32;
        let total_length: u64 = docs.iter().map(|d| u64::from(d.length_tokens)).sum();
        let avgdl = if n_docs == 0 {
            0.0
        } else {
            total_length as f64 / f64::from(n_docs)
        };
        let df = postings
            .iter()
            .map(|(term, list)| (term.clone(), list.document_frequency()))
            .collect();
        let stats = CorpusStats {
            n_docs,
            avgdl,
            total_length,
            df,
        };

        // Terms are visited in ascending order, the same order in which
        // `SparseVector::norm` sums a document vector.
        let mut norm_sq = vec![0.0f64; docs.len()];
        for list in postings.values() {
            let idf = scoring::idf(n_docs, list.document_frequency()).unwrap_or(0.0);
            for posting in &list.postings {
                let weight = scoring::tfidf_weight(posting.term_frequency, idf);
                norm_sq[posting.doc_id.index()] += weight * weight;
            }
        }
        let tfidf_norms = norm_sq.into_iter().map(f64::sqrt).collect();

        let by_external_id = docs
            .iter()
            .map(|d| (d.external_id.clone(), d.doc_id))
            .collect();

        IndexSnapshot {
            analyzer,
            options,
            docs,
            postings,
            stats,
            by_external_id,
            tfidf_norms,
        }
    }

    pub fn empty(analyzer: AnalyzerConfig) -> Self {
        IndexBuilder::new(analyzer).commit()
    }

    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    pub fn options(&self) -> &IndexOptions {
        &self.options
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn n_docs(&self) -> u32 {
        self.stats.n_docs
    }

    pub fn documents(&self) -> &[StoredDocument] {
        &self.docs
    }

    pub fn document(&self, doc_id: DocumentId) -> Result<&StoredDocument> {
        self.docs
            .get(doc_id.index())
            .ok_or(Error::UnknownDocument(doc_id))
    }

    pub fn document_by_external_id(&self, external_id: &str) -> Option<&StoredDocument> {
        self.by_external_id
            .get(external_id)
            .map(|id| &self.docs[id.index()])
    }

    pub fn postings(&self, term: &str) -> Option<&PostingsList> {
        self.postings.get(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = &PostingsList> {
        self.postings.values()
    }

    pub fn term_frequency(&self, term: &str, doc_id: DocumentId) -> u32 {
        self.postings(term)
            .map(|list| list.term_frequency(doc_id))
            .unwrap_or(0)
    }

    pub(crate) fn tfidf_norm(&self, doc_id: DocumentId) -> f64 {
        self.tfidf_norms[doc_id.index()]
    }

    /// Term frequencies of a stored document, recomputed from its text.
    pub fn document_terms(&self, doc_id: DocumentId) -> Result<BTreeMap<Term, u32>> {
        let doc = self.document(doc_id)?;
        Ok(term_counts(indexed_terms(
            &self.analyzer,
            &self.options,
            &doc.title,
            &doc.body,
        )))
    }

    /// Full structural check; returns a description of the first violation.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        for (i, doc) in self.docs.iter().enumerate() {
            if doc.doc_id.index() != i {
                return Err(format!("document at slot {i} has id {}", doc.doc_id));
            }
        }
        for (term, list) in &self.postings {
            if &list.term != term {
                return Err(format!("postings keyed {term} belong to {}", list.term));
            }
            if list.postings.is_empty() {
                return Err(format!("empty postings list for {term}"));
            }
            if self.stats.df(term.as_str()) != list.document_frequency() {
                return Err(format!("df mismatch for {term}"));
            }
            if list.document_frequency() > self.stats.n_docs {
                return Err(format!("df({term}) exceeds n_docs"));
            }
            for pair in list.postings.windows(2) {
                if pair[0].doc_id >= pair[1].doc_id {
                    return Err(format!("postings for {term} not strictly increasing"));
                }
            }
            for posting in &list.postings {
                if posting.term_frequency == 0 {
                    return Err(format!("zero term frequency in postings for {term}"));
                }
                if posting.doc_id.index() >= self.docs.len() {
                    return Err(format!("postings for {term} reference {}", posting.doc_id));
                }
            }
        }
        let mut tf_totals = vec![0u64; self.docs.len()];
        for posting in self.postings.values().flat_map(|l| &l.postings) {
            tf_totals[posting.doc_id.index()] += u64::from(posting.term_frequency);
        }
        for (doc, total) in self.docs.iter().zip(&tf_totals) {
            if u64::from(doc.length_tokens) != *total {
                return Err(format!(
                    "{} has length {} but {total} postings",
                    doc.doc_id, doc.length_tokens
                ));
            }
        }
        if self.stats.df.len() != self.postings.len() {
            return Err("df map and postings disagree on vocabulary".into());
        }
        let total: u64 = self.docs.iter().map(|d| u64::from(d.length_tokens)).sum();
        if total != self.stats.total_length {
            return Err("total_length does not match stored documents".into());
        }
        let expected = self.stats.avgdl * f64::from(self.stats.n_docs);
        if (expected - total as f64).abs() > 1e-9 * (total as f64).max(1.0) {
            return Err("avgdl * n_docs does not match total length".into());
        }
        Ok(())
    }
}

pub fn term_counts(terms: impl IntoIterator<Item = Term>) -> BTreeMap<Term, u32> {
    let mut counts = BTreeMap::new();
    for term in terms {
        *counts.entry(term).or_default() += 1;
    }
    counts
}
