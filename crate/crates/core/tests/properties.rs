use proptest::prelude::*;
use ragsearch::analysis::AnalyzerConfig;
use ragsearch::index::{DocumentId, IndexBuilder};
use ragsearch::retrieval::{rank_order, top_k, ScoredHit};
use ragsearch::scoring::{bm25_score, composite_scores, Bm25Params, CompositeWeights, MetricId};

fn argsort(scores: &[f64]) -> Vec<usize> {
    let mut hits: Vec<ScoredHit> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| ScoredHit {
            doc_id: DocumentId(i as u32),
            external_id: String::new(),
            score: *s,
        })
        .collect();
    hits.sort_by(rank_order);
    hits.iter().map(|h| h.doc_id.index()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn composite_ranking_is_scale_invariant(
        rows in proptest::collection::vec((0.0f64..1.0, 0.0f64..30.0), 1..40),
        w_cos in 0.01f64..5.0,
        w_bm25 in 0.01f64..5.0,
        scale in 0.001f64..1000.0,
        normalize in any::<bool>(),
    ) {
        let cosine: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let bm25: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let columns = [(MetricId::CosineTfidf, cosine), (MetricId::Bm25, bm25)];
        let base = CompositeWeights::new(vec![(MetricId::CosineTfidf, w_cos), (MetricId::Bm25, w_bm25)], normalize).unwrap();
        let scaled = CompositeWeights::new(
            vec![(MetricId::CosineTfidf, w_cos * scale), (MetricId::Bm25, w_bm25 * scale)],
            normalize,
        ).unwrap();
        let a = composite_scores(&columns, &base).unwrap();
        let b = composite_scores(&columns, &scaled).unwrap();
        prop_assert_eq!(argsort(&a), argsort(&b));
    }

    #[test]
    fn single_metric_composite_ranks_like_the_metric(
        values in proptest::collection::vec(0.0f64..30.0, 1..40),
        weight in 0.01f64..5.0,
    ) {
        let weights = CompositeWeights::new(vec![(MetricId::Bm25, weight)], false).unwrap();
        let composite = composite_scores(
            &[(MetricId::Bm25, values.clone()), (MetricId::CosineTfidf, vec![0.0; values.len()])],
            &weights,
        ).unwrap();
        prop_assert_eq!(argsort(&composite), argsort(&values));
    }

    #[test]
    fn bm25_grows_with_term_frequency(
        extra in 0usize..20,
        filler in 1usize..30,
        others in 1usize..6,
    ) {
        // one target document whose "needle" count grows while its length is
        // held fixed, so only f changes
        let total = 25 + filler;
        let build = |needles: usize| {
            let mut builder = IndexBuilder::new(AnalyzerConfig::without_stopwords());
            let mut words = vec!["needle"; needles];
            words.extend(std::iter::repeat_n("hay", total - needles));
            builder.add_document("target", "", &words.join(" ")).unwrap();
            for i in 0..others {
                builder.add_document(&format!("o{i}"), "", &"hay ".repeat(total)).unwrap();
            }
            builder.add_document("other-needle", "", "needle").unwrap();
            builder.commit()
        };
        let params = Bm25Params::default();
        let query = vec!["needle".into()];
        let f = 1 + extra.min(total - 2);
        let lower = bm25_score(&build(f), &query, DocumentId(0), &params).unwrap();
        let higher = bm25_score(&build(f + 1), &query, DocumentId(0), &params).unwrap();
        prop_assert!(higher >= lower);
        let snapshot = build(f + 1);
        let idf = ((others + 2) as f64 / 2.0).ln();
        prop_assert!(higher <= idf * (params.k1 + 1.0) * (1.0 + 1e-12));
        prop_assert!(snapshot.stats().df("needle") == 2);
    }

    #[test]
    fn top_k_prefix_property(
        scores in proptest::collection::vec(0u16..50, 0..300),
        k in 1usize..60,
    ) {
        let hits: Vec<ScoredHit> = scores.iter().enumerate().map(|(i, s)| ScoredHit {
            doc_id: DocumentId(i as u32),
            external_id: i.to_string(),
            score: f64::from(*s) * 0.37,
        }).collect();
        let a = top_k(hits.clone(), k).unwrap();
        let b = top_k(hits, k + 1).unwrap();
        prop_assert_eq!(&b.hits[..a.hits.len()], &a.hits[..]);
        prop_assert!(a.hits.len() <= k);
    }
}

#[test]
fn top_k_matches_full_sort_on_10k_random_scores() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let hits: Vec<ScoredHit> = (0..10_000)
        .map(|i| ScoredHit {
            doc_id: DocumentId(i),
            external_id: i.to_string(),
            // coarse values so ties are common
            score: f64::from(rng.random_range(0..2000u32)) / 100.0,
        })
        .collect();
    let mut oracle = hits.clone();
    oracle.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.doc_id.cmp(&b.doc_id))
    });
    oracle.truncate(50);
    assert_eq!(top_k(hits, 50).unwrap().hits, oracle);
}
