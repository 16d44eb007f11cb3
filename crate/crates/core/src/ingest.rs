//! SQuAD 2.0 ingestion.
//!
//! Every paragraph context becomes one document with external id
//! `"{title}#{paragraph_index}"`. Every question, answerable or not, becomes
//! a query whose single relevant document is the paragraph it was written
//! against.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::analysis::AnalyzerConfig;
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::index::{IndexBuilder, IndexOptions, IndexSnapshot};

#[derive(Debug, Deserialize)]
struct SquadFile {
    data: Vec<SquadArticle>,
}

#[derive(Debug, Deserialize)]
struct SquadArticle {
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Debug, Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    #[serde(default)]
    is_impossible: bool,
    // answer spans are carried through parsing only
    #[serde(default)]
    #[allow(dead_code)]
    answers: Vec<SquadAnswer>,
}

#[derive(Debug, Deserialize)]
#[allow(dead_code)]
struct SquadAnswer {
    text: String,
    answer_start: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadQuestion {
    pub qas_id: String,
    pub question: String,
    pub is_impossible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadRecord {
    pub article_title: String,
    pub paragraph_index: usize,
    pub context: String,
    pub questions: Vec<SquadQuestion>,
}

impl SquadRecord {
    pub fn external_id(&self) -> String {
        paragraph_id(&self.article_title, self.paragraph_index)
    }
}

pub fn paragraph_id(title: &str, paragraph_index: usize) -> String {
    format!("{title}#{paragraph_index}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestDocument {
    pub external_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestQuery {
    pub query_id: String,
    pub text: String,
    pub is_impossible: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub n_articles: usize,
    pub n_paragraphs: usize,
    pub n_questions: usize,
    pub n_impossible: usize,
    pub n_deduped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutput {
    pub documents: Vec<IngestDocument>,
    pub queries: Vec<IngestQuery>,
    pub qrels: Qrels,
    pub stats: IngestStats,
}

/// Parses raw SQuAD JSON into records, reporting the JSON path of any
/// structural error.
pub fn parse_squad_records(json_text: &str) -> Result<Vec<SquadRecord>> {
    let deserializer = &mut serde_json::Deserializer::from_str(json_text);
    let file: SquadFile =
        serde_path_to_error::deserialize(deserializer).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    Ok(file
        .data
        .into_iter()
        .flat_map(|article| {
            let title = article.title;
            article
                .paragraphs
                .into_iter()
                .enumerate()
                .map(move |(paragraph_index, p)| SquadRecord {
                    article_title: title.clone(),
                    paragraph_index,
                    context: p.context,
                    questions: p
                        .qas
                        .into_iter()
                        .map(|qa| SquadQuestion {
                            qas_id: qa.id,
                            question: qa.question,
                            is_impossible: qa.is_impossible,
                        })
                        .collect(),
                })
        })
        .collect())
}

pub fn parse_squad(json_text: &str) -> Result<IngestOutput> {
    from_records(parse_squad_records(json_text)?)
}

/// Builds documents, queries and qrels from parsed records. Paragraphs whose
/// contexts are equal after NFC normalization collapse onto the first one;
/// their questions point at the survivor.
pub fn from_records(records: Vec<SquadRecord>) -> Result<IngestOutput> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut stats = IngestStats::default();
    let mut titles = HashSet::new();
    let mut by_context: HashMap<String, String> = HashMap::new();
    let mut seen_ids = HashSet::new();
    let mut seen_questions = HashSet::new();
    let mut documents = Vec::new();
    let mut queries = Vec::new();
    let mut qrels = Qrels::new();

    for record in records {
        titles.insert(record.article_title.clone());
        stats.n_paragraphs += 1;
        let external_id = record.external_id();
        let normalized: String = record.context.nfc().collect();
        let target = match by_context.get(&normalized) {
            Some(existing) => {
                stats.n_deduped += 1;
                existing.clone()
            }
            None => {
                if !seen_ids.insert(external_id.clone()) {
                    return Err(Error::Parse {
                        path: format!("data[title={:?}]", record.article_title),
                        message: format!("paragraph id {external_id:?} occurs twice"),
                    });
                }
                by_context.insert(normalized, external_id.clone());
                documents.push(IngestDocument {
                    external_id: external_id.clone(),
                    title: record.article_title.clone(),
                    body: record.context,
                });
                external_id
            }
        };
        for q in record.questions {
            if !seen_questions.insert(q.qas_id.clone()) {
                return Err(Error::Parse {
                    path: format!("qas[id={:?}]", q.qas_id),
                    message: "question id is not unique".into(),
                });
            }
            stats.n_questions += 1;
            if q.is_impossible {
                stats.n_impossible += 1;
            }
            qrels.insert(q.qas_id.clone(), target.clone());
            queries.push(IngestQuery {
                query_id: q.qas_id,
                text: q.question,
                is_impossible: q.is_impossible,
            });
        }
    }
    stats.n_articles = titles.len();

    Ok(IngestOutput {
        documents,
        queries,
        qrels,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub n_paragraphs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkIndex {
    pub snapshot: IndexSnapshot,
    pub queries: Vec<IngestQuery>,
    pub qrels: Qrels,
    /// Queries whose paragraph was sampled out.
    pub n_dropped_queries: usize,
}

/// Positions of the documents kept by a seeded uniform sample, ascending.
pub fn sample_positions(n_documents: usize, sampling: Option<Sample>) -> Vec<usize> {
    match sampling {
        Some(s) if s.n_paragraphs < n_documents => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let mut picked =
                rand::seq::index::sample(&mut rng, n_documents, s.n_paragraphs).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n_documents).collect(),
    }
}

/// Indexes all paragraphs, or a seeded uniform sample of them, and keeps
/// only the queries whose relevant paragraph made it into the index.
pub fn build_benchmark_index(
    output: &IngestOutput,
    analyzer: AnalyzerConfig,
    options: IndexOptions,
    sample: Option<Sample>,
) -> Result<BenchmarkIndex> {
    let mut builder = IndexBuilder::with_options(analyzer, options);
    let mut kept = BTreeSet::new();
    for position in sample_positions(output.documents.len(), sample) {
        let doc = &output.documents[position];
        builder.add_document(&doc.external_id, &doc.title, &doc.body)?;
        kept.insert(doc.external_id.as_str());
    }
    let snapshot = builder.commit();

    let (queries, qrels, n_dropped_queries) =
        retain_indexed_queries(output, |id| kept.contains(id));
    Ok(BenchmarkIndex {
        snapshot,
        queries,
        qrels,
        n_dropped_queries,
    })
}

/// Queries (and their qrels) whose relevant documents all satisfy
/// `indexed`, plus the number dropped.
pub fn retain_indexed_queries(
    output: &IngestOutput,
    indexed: impl Fn(&str) -> bool,
) -> (Vec<IngestQuery>, Qrels, usize) {
    let mut qrels = output.qrels.clone();
    qrels.retain(|_, docs| docs.iter().all(|d| indexed(d)));
    let queries: Vec<IngestQuery> = output
        .queries
        .iter()
        .filter(|q| qrels.relevant(&q.query_id).is_some())
        .cloned()
        .collect();
    let dropped = output.queries.len() - queries.len();
    (queries, qrels, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"version": "v2.0", "data": [{"title": "Normans", "paragraphs": [
        {"context": "The Normans were the people who gave their name to Normandy.",
         "qas": [
            {"id": "q1", "question": "Who gave their name to Normandy?", "is_impossible": false,
             "answers": [{"text": "The Normans", "answer_start": 0}]},
            {"id": "q2", "question": "Who took their name from Normandy?", "is_impossible": true,
             "answers": [], "plausible_answers": [{"text": "Normans", "answer_start": 4}]}
         ]}]}]}"#;

    #[test]
    fn minimal_file() {
        let out = parse_squad(MINIMAL).unwrap();
        assert_eq!(out.documents.len(), 1);
        assert_eq!(out.documents[0].external_id, "Normans#0");
        assert_eq!(out.queries.len(), 2);
        assert_eq!(out.qrels.n_judgments(), 2);
        assert_eq!(
            out.stats,
            IngestStats {
                n_articles: 1,
                n_paragraphs: 1,
                n_questions: 2,
                n_impossible: 1,
                n_deduped: 0
            }
        );
        assert!(out.queries[1].is_impossible);
        assert!(out.qrels.relevant("q2").unwrap().contains("Normans#0"));
    }

    #[test]
    fn parse_errors_carry_a_json_path() {
        let err =
            parse_squad(r#"{"data": [{"title": "T", "paragraphs": [{"qas": []}]}]}"#).unwrap_err();
        match err {
            Error::Parse { path, message } => {
                assert_eq!(path, "data[0].paragraphs[0]");
                assert!(message.contains("context"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_squad("{not json"), Err(Error::Parse { .. })));
    }

    #[test]
    fn empty_dataset() {
        assert!(matches!(
            parse_squad(r#"{"data": []}"#),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            parse_squad(r#"{"data": [{"title": "T", "paragraphs": []}]}"#),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn duplicate_contexts_are_merged_after_nfc() {
        // "é" precomposed vs "e" + combining acute
        let json = r#"{"data": [
            {"title": "A", "paragraphs": [{"context": "café open", "qas": [{"id": "a", "question": "x?"}]}]},
            {"title": "B", "paragraphs": [{"context": "cafe\u0301 open", "qas": [{"id": "b", "question": "y?"}]},
                                          {"context": "other", "qas": [{"id": "c", "question": "z?"}]}]}]}"#;
        let out = parse_squad(json).unwrap();
        assert_eq!(out.stats.n_deduped, 1);
        assert_eq!(out.stats.n_paragraphs, 3);
        assert_eq!(out.documents.len(), 2);
        assert_eq!(out.qrels.n_judgments(), 3);
        assert!(out.qrels.relevant("b").unwrap().contains("A#0"));
        assert!(out.qrels.relevant("c").unwrap().contains("B#1"));
    }

    #[test]
    fn duplicate_question_ids_rejected() {
        let json = r#"{"data": [{"title": "T", "paragraphs": [
            {"context": "one", "qas": [{"id": "x", "question": "a?"}]},
            {"context": "two", "qas": [{"id": "x", "question": "b?"}]}]}]}"#;
        assert!(matches!(parse_squad(json), Err(Error::Parse { .. })));
    }

    fn three_paragraphs() -> IngestOutput {
        parse_squad(
            r#"{"data": [{"title": "T", "paragraphs": [
            {"context": "alpha beta", "qas": [{"id": "q0", "question": "alpha?"}]},
            {"context": "gamma delta", "qas": [{"id": "q1", "question": "gamma?"}]},
            {"context": "epsilon zeta", "qas": [{"id": "q2", "question": "zeta?"}]}]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn full_benchmark_index() {
        let bench = build_benchmark_index(
            &three_paragraphs(),
            AnalyzerConfig::default(),
            IndexOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(bench.snapshot.n_docs(), 3);
        assert_eq!(bench.queries.len(), 3);
        assert_eq!(bench.n_dropped_queries, 0);
    }

    #[test]
    fn sampled_benchmark_index_drops_orphaned_queries() {
        let out = three_paragraphs();
        let sample = Some(Sample {
            n_paragraphs: 2,
            seed: 42,
        });
        let a = build_benchmark_index(
            &out,
            AnalyzerConfig::default(),
            IndexOptions::default(),
            sample,
        )
        .unwrap();
        let b = build_benchmark_index(
            &out,
            AnalyzerConfig::default(),
            IndexOptions::default(),
            sample,
        )
        .unwrap();
        assert_eq!(a.snapshot.documents(), b.snapshot.documents());
        assert_eq!(a.snapshot.n_docs(), 2);
        assert_eq!(a.queries.len(), 2);
        assert_eq!(a.n_dropped_queries, 1);
        for q in &a.queries {
            for target in a.qrels.relevant(&q.query_id).unwrap() {
                assert!(a.snapshot.document_by_external_id(target).is_some());
            }
        }
    }

    #[test]
    fn different_seeds_can_differ() {
        let a = sample_positions(
            1000,
            Some(Sample {
                n_paragraphs: 10,
                seed: 1,
            }),
        );
        let b = sample_positions(
            1000,
            Some(Sample {
                n_paragraphs: 10,
                seed: 2,
            }),
        );
        assert_eq!(a.len(), 10);
        assert_ne!(a, b);
        assert_eq!(
            sample_positions(
                5,
                Some(Sample {
                    n_paragraphs: 10,
                    seed: 1
                })
            ),
            vec![0, 1, 2, 3, 4]
        );
    }
}
