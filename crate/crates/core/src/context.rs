//! Packs ranked passages into a token-budgeted context block for a
//! downstream generator.
//!
//! A passage costs its analyzed term count plus [`SEPARATOR_COST`]. Passages
//! are taken whole, in rank order, and packing stops at the first one that
//! does not fit. Stopping (rather than skipping ahead to smaller passages)
//! makes the result a prefix of the ranking, so a larger budget can only add
//! passages.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSnapshot;
use crate::retrieval::RankedList;

pub const SEPARATOR_COST: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub external_id: String,
    pub title: String,
    pub body: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub query: String,
    pub passages: Vec<Passage>,
    pub rendered: String,
    pub token_budget: u32,
    pub tokens_used: u32,
}

pub fn passage_cost(length_tokens: u32) -> u32 {
    length_tokens.saturating_add(SEPARATOR_COST)
}

pub fn assemble_context(
    query: &str,
    hits: &RankedList,
    snapshot: &IndexSnapshot,
    token_budget: u32,
) -> Result<ContextBundle> {
    if token_budget == 0 {
        return Err(Error::InvalidParams(
            "token budget must be at least 1".into(),
        ));
    }
    let mut passages = Vec::new();
    let mut rendered = String::new();
    let mut tokens_used = 0u32;
    for hit in &hits.hits {
        let doc = snapshot.document(hit.doc_id)?;
        let cost = passage_cost(doc.length_tokens);
        if cost > token_budget - tokens_used {
            break;
        }
        tokens_used += cost;
        let _ = write!(
            rendered,
            "[{}] {}\n{}\n\n",
            passages.len() + 1,
            doc.title,
            doc.body
        );
        passages.push(Passage {
            external_id: doc.external_id.clone(),
            title: doc.title.clone(),
            body: doc.body.clone(),
            score: hit.score,
        });
    }
    Ok(ContextBundle {
        query: query.to_owned(),
        passages,
        rendered,
        token_budget,
        tokens_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::AnalyzerConfig;
    use crate::index::{DocumentId, IndexBuilder};
    use crate::retrieval::ScoredHit;
    use proptest::prelude::*;

    /// One document per length, bodies made of distinct filler words.
    fn snapshot_with_lengths(lengths: &[u32]) -> IndexSnapshot {
        let mut builder = IndexBuilder::new(AnalyzerConfig::without_stopwords());
        for (i, len) in lengths.iter().enumerate() {
            let body = (0..*len)
                .map(|j| format!("w{j}"))
                .collect::<Vec<_>>()
                .join(" ");
            builder
                .add_document(&format!("p{i}"), &format!("Title {i}"), &body)
                .unwrap();
        }
        builder.commit()
    }

    fn ranked(order: &[u32]) -> RankedList {
        RankedList {
            hits: order
                .iter()
                .enumerate()
                .map(|(rank, d)| ScoredHit {
                    doc_id: DocumentId(*d),
                    external_id: format!("p{d}"),
                    score: 10.0 - rank as f64,
                })
                .collect(),
            top_k_count: order.len().max(1),
        }
    }

    #[test]
    fn empty_hits() {
        let snapshot = snapshot_with_lengths(&[3]);
        let bundle = assemble_context("q", &ranked(&[]), &snapshot, 512).unwrap();
        assert!(bundle.passages.is_empty());
        assert_eq!(bundle.rendered, "");
        assert_eq!(bundle.tokens_used, 0);
    }

    #[test]
    fn first_passage_too_large() {
        let snapshot = snapshot_with_lengths(&[100]);
        let bundle = assemble_context("q", &ranked(&[0]), &snapshot, 50).unwrap();
        assert!(bundle.passages.is_empty());
        assert_eq!(bundle.tokens_used, 0);
    }

    #[test]
    fn greedy_in_rank_order() {
        // costs 40, 60, 80 including the separator
        let snapshot = snapshot_with_lengths(&[32, 52, 72]);
        let bundle = assemble_context("q", &ranked(&[0, 1, 2]), &snapshot, 120).unwrap();
        let ids: Vec<_> = bundle
            .passages
            .iter()
            .map(|p| p.external_id.as_str())
            .collect();
        assert_eq!(ids, vec!["p0", "p1"]);
        assert_eq!(bundle.tokens_used, 100);
    }

    #[test]
    fn rendering() {
        let snapshot = snapshot_with_lengths(&[2, 1]);
        let bundle = assemble_context("q", &ranked(&[1, 0]), &snapshot, 100).unwrap();
        assert_eq!(bundle.rendered, "[1] Title 1\nw0\n\n[2] Title 0\nw0 w1\n\n");
        assert_eq!(bundle.passages[0].score, 10.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn budget_monotonicity(
            lengths in proptest::collection::vec(0u32..60, 1..8),
            budget in 1u32..300,
            extra in 0u32..300,
        ) {
            let snapshot = snapshot_with_lengths(&lengths);
            let order: Vec<u32> = (0..lengths.len() as u32).rev().collect();
            let hits = ranked(&order);
            let small = assemble_context("q", &hits, &snapshot, budget).unwrap();
            let large = assemble_context("q", &hits, &snapshot, budget + extra).unwrap();
            prop_assert!(small.tokens_used <= budget);
            prop_assert!(large.passages.len() >= small.passages.len());
            prop_assert_eq!(&large.passages[..small.passages.len()], &small.passages[..]);
        }
    }
}
