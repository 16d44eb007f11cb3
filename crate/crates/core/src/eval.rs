//! Retrieval-quality evaluation: per-query precision, recall and F1 at a
//! cutoff, macro-averaged over a query set, plus report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSnapshot;
use crate::retrieval::{search, ScorerConfig};

pub const DEFAULT_EVAL_K: usize = 5;

/// Relevance judgments: query id to the external ids of its relevant
/// documents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one judgment.
    pub fn insert(&mut self, query_id: impl Into<String>, doc: impl Into<String>) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc.into());
    }

    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.judgments.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.judgments.iter()
    }

    pub fn n_judgments(&self) -> usize {
        self.judgments.values().map(BTreeSet::len).sum()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&str, &BTreeSet<String>) -> bool) {
        self.judgments.retain(|q, docs| keep(q, docs));
    }
}

impl FromIterator<(String, String)> for Qrels {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        let mut qrels = Qrels::new();
        for (query, doc) in iter {
            qrels.insert(query, doc);
        }
        qrels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub const ZERO: Prf = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Set-based precision/recall/F1. Duplicates in `retrieved` count once.
pub fn precision_recall_f1<S: AsRef<str>>(
    retrieved: &[S],
    relevant: &BTreeSet<String>,
) -> Result<Prf> {
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet);
    }
    let retrieved: BTreeSet<&str> = retrieved.iter().map(AsRef::as_ref).collect();
    if retrieved.is_empty() {
        return Ok(Prf::ZERO);
    }
    let hits = retrieved
        .iter()
        .filter(|id| relevant.contains(**id))
        .count() as f64;
    let precision = hits / retrieved.len() as f64;
    let recall = hits / relevant.len() as f64;
    Ok(Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    #[serde(rename = "scorer")]
    pub scorer_name: String,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub query_id: String,
    pub retrieved: Vec<String>,
    pub metrics: Prf,
    /// The query analyzed to nothing; scored as all zeros.
    pub empty_query: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub result: EvalResult,
    pub n_empty_queries: usize,
    /// Sorted by query id.
    pub per_query: Vec<QueryEval>,
}

/// Macro average of per-query metrics. The fold runs over query-id order.
pub fn macro_average(scorer_name: &str, k: usize, per_query: &[QueryEval]) -> EvalResult {
    let n = per_query.len();
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for q in per_query {
        p += q.metrics.precision;
        r += q.metrics.recall;
        f += q.metrics.f1;
    }
    let mean = |sum: f64| if n == 0 { 0.0 } else { sum / n as f64 };
    EvalResult {
        scorer_name: scorer_name.to_owned(),
        k,
        precision: mean(p),
        recall: mean(r),
        f1: mean(f),
        n_queries: n,
    }
}

/// Runs every query through [`search`] and scores the top `k` against
/// `qrels`. Queries are evaluated in parallel.
pub fn evaluate_run<Q: AsRef<str> + Sync, T: AsRef<str> + Sync>(
    snapshot: &IndexSnapshot,
    queries: &[(Q, T)],
    qrels: &Qrels,
    scorer: &ScorerConfig,
    k: usize,
) -> Result<EvalRun> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if queries.is_empty() {
        return Err(Error::InvalidParams("no queries to evaluate".into()));
    }
    for (query_id, _) in queries {
        if qrels.relevant(query_id.as_ref()).is_none() {
            return Err(Error::MissingJudgment(query_id.as_ref().to_owned()));
        }
    }

    let mut per_query = queries
        .par_iter()
        .map(|(query_id, text)| {
            let query_id = query_id.as_ref();
            let relevant = qrels.relevant(query_id).expect("checked above");
            match search(snapshot, text.as_ref(), scorer, k) {
                Ok(list) => {
                    let retrieved: Vec<String> = list.external_ids().map(str::to_owned).collect();
                    Ok(QueryEval {
                        query_id: query_id.to_owned(),
                        metrics: precision_recall_f1(&retrieved, relevant)?,
                        retrieved,
                        empty_query: false,
                    })
                }
                Err(Error::EmptyQuery) => Ok(QueryEval {
                    query_id: query_id.to_owned(),
                    retrieved: Vec::new(),
                    metrics: Prf::ZERO,
                    empty_query: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    per_query.sort_by(|a, b| a.query_id.cmp(&b.query_id));

    Ok(EvalRun {
        result: macro_average(scorer.name(), k, &per_query),
        n_empty_queries: per_query.iter().filter(|q| q.empty_query).count(),
        per_query,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidParams(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

pub const CSV_HEADER: &str = "scorer,k,precision,recall,f1,n_queries";

const TABLE_NOTE: &str =
    "# Retrieval metrics only (precision/recall/F1 of the source passage at k). \
No answer generation is run, so there is no end-to-end accuracy column.";

/// Renders results in input order. Numbers use the shortest decimal that
/// round-trips.
pub fn emit_report(results: &[EvalResult], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in results {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.scorer_name, r.k, r.precision, r.recall, r.f1, r.n_queries
                );
            }
            out
        }
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(results).expect("EvalResult serializes");
            out.push('\n');
            out
        }
        ReportFormat::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "{TABLE_NOTE}");
            let _ = writeln!(
                out,
                "{:<12} {:>4} {:>10} {:>10} {:>10} {:>9}",
                "scorer", "k", "precision", "recall", "f1", "n_queries"
            );
            for r in results {
                let _ = writeln!(
                    out,
                    "{:<12} {:>4} {:>10.4} {:>10.4} {:>10.4} {:>9}",
                    r.scorer_name, r.k, r.precision, r.recall, r.f1, r.n_queries
                );
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::AnalyzerConfig;
    use crate::index::IndexBuilder;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| (*s).to_owned()).collect()
    }

    #[test]
    fn prf_examples() {
        let perfect = precision_recall_f1(&["a", "b"], &set(&["b", "a"])).unwrap();
        assert_eq!(
            perfect,
            Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );

        assert_eq!(
            precision_recall_f1(&["x"], &set(&["a"])).unwrap(),
            Prf::ZERO
        );
        assert_eq!(
            precision_recall_f1::<&str>(&[], &set(&["a"])).unwrap(),
            Prf::ZERO
        );

        let m = precision_recall_f1(&["a", "b", "c"], &set(&["a", "d"])).unwrap();
        assert_relative_eq!(m.precision, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(m.recall, 0.5, max_relative = 1e-15);
        assert_relative_eq!(m.f1, 0.4, max_relative = 1e-15);

        assert!(matches!(
            precision_recall_f1(&["a"], &BTreeSet::new()),
            Err(Error::EmptyRelevantSet)
        ));
    }

    fn tiny() -> (IndexSnapshot, Qrels) {
        let mut builder = IndexBuilder::new(AnalyzerConfig::default());
        builder
            .add_document("p0", "", "the quick brown fox")
            .unwrap();
        builder
            .add_document("p1", "", "lazy dogs sleep all day")
            .unwrap();
        let qrels = [("q0", "p0"), ("q1", "p1"), ("q2", "p1")]
            .into_iter()
            .map(|(q, d)| (q.to_owned(), d.to_owned()))
            .collect();
        (builder.commit(), qrels)
    }

    #[test]
    fn single_perfect_query() {
        let (snapshot, qrels) = tiny();
        let run = evaluate_run(
            &snapshot,
            &[("q0", "brown fox")],
            &qrels,
            &ScorerConfig::bm25(),
            5,
        )
        .unwrap();
        assert_eq!(
            run.result,
            EvalResult {
                scorer_name: "bm25".into(),
                k: 5,
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                n_queries: 1
            }
        );
    }

    #[test]
    fn macro_mean_and_empty_queries() {
        let (snapshot, qrels) = tiny();
        let queries = [("q0", "fox"), ("q1", "the of")];
        let run = evaluate_run(&snapshot, &queries, &qrels, &ScorerConfig::bm25(), 5).unwrap();
        assert_eq!(
            (run.result.precision, run.result.recall, run.result.f1),
            (0.5, 0.5, 0.5)
        );
        assert_eq!(run.n_empty_queries, 1);
        assert!(run.per_query[1].empty_query);
    }

    #[test]
    fn missing_judgment_is_an_error() {
        let (snapshot, qrels) = tiny();
        let err = evaluate_run(
            &snapshot,
            &[("q9", "fox")],
            &qrels,
            &ScorerConfig::bm25(),
            5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingJudgment(q) if q == "q9"));
    }

    fn row(name: &str, p: f64) -> EvalResult {
        EvalResult {
            scorer_name: name.into(),
            k: 5,
            precision: p,
            recall: 0.5,
            f1: f1_score(p, 0.5),
            n_queries: 3,
        }
    }

    #[test]
    fn csv_report() {
        let report = emit_report(&[row("bm25", 0.25)], ReportFormat::Csv);
        assert_eq!(
            report,
            "scorer,k,precision,recall,f1,n_queries\nbm25,5,0.25,0.5,0.3333333333333333,3\n"
        );
    }

    #[test]
    fn json_report_has_six_fields() {
        let report = emit_report(&[row("bm25", 0.25)], ReportFormat::Json);
        let value: serde_json::Value = serde_json::from_str(&report).unwrap();
        let object = value.as_array().unwrap()[0].as_object().unwrap();
        let keys: BTreeSet<&str> = object.keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            BTreeSet::from(["scorer", "k", "precision", "recall", "f1", "n_queries"])
        );
    }

    #[test]
    fn rows_keep_input_order() {
        let rows: Vec<_> = ["baseline", "bm25", "tfidf", "composite"]
            .iter()
            .map(|n| row(n, 0.1))
            .collect();
        for format in [ReportFormat::Csv, ReportFormat::Table] {
            let report = emit_report(&rows, format);
            let positions: Vec<usize> = ["baseline", "bm25", "tfidf", "composite"]
                .iter()
                .map(|n| report.find(&format!("\n{n}")).unwrap())
                .collect();
            assert!(positions.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(emit_report(&rows, ReportFormat::Table).starts_with("# Retrieval metrics only"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn metric_bounds(
            retrieved in proptest::collection::vec(0u8..30, 0..15),
            relevant in proptest::collection::btree_set(0u8..30, 1..10),
        ) {
            let retrieved: Vec<String> = retrieved.iter().map(|x| x.to_string()).collect();
            let relevant: BTreeSet<String> = relevant.iter().map(|x| x.to_string()).collect();
            let m = precision_recall_f1(&retrieved, &relevant).unwrap();
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if m.precision > 0.0 && m.recall > 0.0 {
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-15);
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-15);
            }
            if m.precision == m.recall {
                prop_assert!((m.f1 - m.precision).abs() <= 1e-15);
            }
        }
    }
}
