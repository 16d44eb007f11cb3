use ragsearch::analysis::AnalyzerConfig;
use ragsearch::index::IndexBuilder;
use ragsearch::retrieval::{search, ScorerConfig};
use ragsearch::scoring::CompositeWeights;
use ragsearch::{load, persist, Error};

const QUERIES: [&str; 10] = [
    "cat",
    "dog chased",
    "mat sat cat",
    "unknown words only",
    "bird",
    "the cat and the dog",
    "ünïcödé",
    "text newline",
    "chased chased chased",
    "mat dog bird text",
];

#[test]
fn search_results_survive_round_trip() {
    let mut builder = IndexBuilder::new(AnalyzerConfig::default());
    builder
        .add_document("a", "Alpha", "The cat sat on the mat")
        .unwrap();
    builder
        .add_document("b", "Beta", "A dog chased the cat and a bird")
        .unwrap();
    builder
        .add_document("c", "Gamma", "Ünïcödé text\nwith a newline and a mat")
        .unwrap();
    let before = builder.commit();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three.ragidx");
    persist(&before, &path).unwrap();
    let after = load(&path).unwrap();
    assert_eq!(before, after);

    let scorers = [
        ScorerConfig::bm25(),
        ScorerConfig::tfidf(),
        ScorerConfig::composite(CompositeWeights::default()),
    ];
    for query in QUERIES {
        for scorer in &scorers {
            let a = search(&before, query, scorer, 5).unwrap();
            let b = search(&after, query, scorer, 5).unwrap();
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
            for (x, y) in a.hits.iter().zip(&b.hits) {
                assert_eq!(x.score.to_bits(), y.score.to_bits());
            }
        }
    }
}

#[test]
fn persisting_twice_is_byte_identical() {
    let mut builder = IndexBuilder::new(AnalyzerConfig::default());
    for i in 0..50 {
        builder
            .add_document(
                &format!("d{i}"),
                "",
                &format!("word{} shared term{}", i % 7, i % 3),
            )
            .unwrap();
    }
    let snapshot = builder.commit();
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("1"), dir.path().join("2"));
    persist(&snapshot, &p1).unwrap();
    persist(&load(&p1).unwrap(), &p2).unwrap();
    assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
}

#[test]
fn garbage_file_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad");
    std::fs::write(
        &path,
        b"NOTANINDEX and then some bytes to get past the header length",
    )
    .unwrap();
    assert!(matches!(load(&path), Err(Error::Format(_))));
}
