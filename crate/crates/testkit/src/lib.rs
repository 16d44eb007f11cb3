//! Test support for ragsearch: a brute-force reference scorer that works
//! directly on raw text (no inverted index, no shared code with the engine),
//! a generator for synthetic SQuAD-format datasets, and helpers for locating
//! the official SQuAD files when they are available.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Env var naming a directory holding `train-v2.0.json` / `dev-v2.0.json`.
pub const SQUAD_DIR_ENV: &str = "RAGSEARCH_SQUAD_DIR";

/// Looks for an official SQuAD file in `$RAGSEARCH_SQUAD_DIR`, then in
/// `data/` at the workspace root.
pub fn find_squad_file(name: &str) -> Option<PathBuf> {
    let mut dirs = Vec::new();
    if let Some(dir) = std::env::var_os(SQUAD_DIR_ENV) {
        dirs.push(PathBuf::from(dir));
    }
    dirs.push(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    dirs.into_iter().map(|d| d.join(name)).find(|p| p.is_file())
}

/// Reference analyzer: tag removal, entity decoding, alphanumeric runs,
/// lowercasing, stopword filtering. Written as a single character scan.
#[derive(Debug, Clone)]
pub struct ReferenceAnalyzer {
    pub stopwords: BTreeSet<String>,
}

impl ReferenceAnalyzer {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(stopwords: I) -> Self {
        ReferenceAnalyzer {
            stopwords: stopwords.into_iter().map(Into::into).collect(),
        }
    }

    pub fn tokens(&self, raw: &str) -> Vec<String> {
        let text = decode(&remove_tags(raw));
        let mut out = Vec::new();
        let mut current = String::new();
        for c in text.chars().chain(std::iter::once(' ')) {
            if c.is_alphabetic() || c.is_numeric() {
                current.push(c);
            } else if !current.is_empty() {
                let token = current.to_lowercase();
                if !self.stopwords.contains(&token) {
                    out.push(token);
                }
                current.clear();
            }
        }
        out
    }
}

fn remove_tags(raw: &str) -> String {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<'
            && i + 1 < chars.len()
            && (chars[i + 1].is_ascii_alphabetic() || "/!?".contains(chars[i + 1]))
        {
            if let Some(offset) = chars[i..].iter().position(|c| *c == '>') {
                out.push(' ');
                i += offset + 1;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn decode(text: &str) -> String {
    let named = [
        ("&amp;", "&"),
        ("&lt;", "<"),
        ("&gt;", ">"),
        ("&quot;", "\""),
        ("&apos;", "'"),
        ("&nbsp;", " "),
    ];
    let mut out = String::new();
    let mut i = 0;
    'outer: while i < text.len() {
        let rest = &text[i..];
        if rest.starts_with('&') {
            for (entity, replacement) in named {
                if rest.starts_with(entity) {
                    out.push_str(replacement);
                    i += entity.len();
                    continue 'outer;
                }
            }
            if let Some(end) = rest.find(';').filter(|e| *e <= 11) {
                let body = &rest[1..end];
                let code = if let Some(hex) =
                    body.strip_prefix("#x").or_else(|| body.strip_prefix("#X"))
                {
                    u32::from_str_radix(hex, 16).ok()
                } else if let Some(dec) = body.strip_prefix('#') {
                    dec.parse().ok()
                } else {
                    None
                };
                if let Some(c) = code.and_then(char::from_u32) {
                    out.push(c);
                    i += end + 1;
                    continue;
                }
            }
        }
        let c = rest.chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    out
}

/// Brute-force scorer over raw document text. Every call rescans the whole
/// corpus for document frequencies.
#[derive(Debug, Clone)]
pub struct ReferenceScorer {
    analyzer: ReferenceAnalyzer,
    ids: Vec<String>,
    tokens: Vec<Vec<String>>,
}

impl ReferenceScorer {
    pub fn new(analyzer: ReferenceAnalyzer, documents: &[(String, String)]) -> Self {
        ReferenceScorer {
            ids: documents.iter().map(|(id, _)| id.clone()).collect(),
            tokens: documents
                .iter()
                .map(|(_, body)| analyzer.tokens(body))
                .collect(),
            analyzer,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn external_id(&self, doc: usize) -> &str {
        &self.ids[doc]
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        self.analyzer.tokens(text)
    }

    fn document_frequency(&self, term: &str) -> usize {
        self.tokens
            .iter()
            .filter(|toks| toks.iter().any(|t| t == term))
            .count()
    }

    fn count(&self, doc: usize, term: &str) -> usize {
        self.tokens[doc].iter().filter(|t| *t == term).count()
    }

    fn idf(&self, term: &str) -> f64 {
        let df = self.document_frequency(term);
        if df == 0 {
            0.0
        } else {
            (self.len() as f64 / df as f64).ln()
        }
    }

    /// Whether the document contains any term of the query.
    pub fn matches(&self, query: &str, doc: usize) -> bool {
        let q = self.analyze(query);
        self.tokens[doc].iter().any(|t| q.contains(t))
    }

    pub fn bm25(&self, query: &str, doc: usize, k1: f64, b: f64) -> f64 {
        let total: usize = self.tokens.iter().map(Vec::len).sum();
        let avgdl = total as f64 / self.len() as f64;
        let len = self.tokens[doc].len() as f64;
        let distinct: BTreeSet<String> = self.analyze(query).into_iter().collect();
        distinct
            .iter()
            .map(|w| {
                let f = self.count(doc, w) as f64;
                if f == 0.0 {
                    return 0.0;
                }
                let big_k = k1 * ((1.0 - b) + b * len / avgdl);
                self.idf(w) * (k1 + 1.0) * f / (big_k + f)
            })
            .sum()
    }

    fn tfidf(&self, tokens: &[String]) -> HashMap<String, f64> {
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *tf.entry(t).or_default() += 1;
        }
        tf.into_iter()
            .map(|(t, n)| (t.to_owned(), n as f64 * self.idf(t)))
            .collect()
    }

    pub fn cosine(&self, query: &str, doc: usize) -> f64 {
        let q = self.tfidf(&self.analyze(query));
        let d = self.tfidf(&self.tokens[doc]);
        let dot: f64 = q
            .iter()
            .map(|(t, w)| w * d.get(t).copied().unwrap_or(0.0))
            .sum();
        let nq = q.values().map(|w| w * w).sum::<f64>().sqrt();
        let nd = d.values().map(|w| w * w).sum::<f64>().sqrt();
        if nq == 0.0 || nd == 0.0 {
            0.0
        } else {
            dot / (nq * nd)
        }
    }
}

/// Relative difference, treating two values within `1e-300` as equal.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-300 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSquad {
    pub n_articles: usize,
    pub paragraphs_per_article: usize,
    pub questions_per_paragraph: usize,
    pub vocabulary: usize,
    pub seed: u64,
}

impl Default for SyntheticSquad {
    fn default() -> Self {
        SyntheticSquad {
            n_articles: 50,
            paragraphs_per_article: 24,
            questions_per_paragraph: 3,
            vocabulary: 5000,
            seed: 7,
        }
    }
}

const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "in", "to", "was", "is", "a", "for", "with", "by", "which", "that", "on",
    "as",
];

fn pseudo_word(rank: usize) -> String {
    const SYLLABLES: &[&str] = &[
        "ka", "lo", "mi", "ne", "su", "ta", "ri", "po", "de", "va", "qu", "zo", "bel", "gar",
        "tin", "dra",
    ];
    let mut n = rank + 1;
    let mut word = String::new();
    while n > 0 {
        word.push_str(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    word
}

impl SyntheticSquad {
    /// A SQuAD 2.0-shaped JSON document. Word frequencies follow a Zipf-like
    /// law; questions reuse several words of their paragraph plus noise.
    pub fn generate(&self) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let words: Vec<String> = (0..self.vocabulary).map(pseudo_word).collect();
        let harmonic: Vec<f64> = (1..=self.vocabulary)
            .scan(0.0, |acc, r| {
                *acc += 1.0 / r as f64;
                Some(*acc)
            })
            .collect();
        let total = *harmonic.last().unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> String {
            let x = rng.random::<f64>() * total;
            let i = harmonic
                .partition_point(|h| *h < x)
                .min(self.vocabulary - 1);
            words[i].clone()
        };

        let mut qid = 0usize;
        let mut articles = Vec::new();
        for a in 0..self.n_articles {
            let mut paragraphs = Vec::new();
            for _ in 0..self.paragraphs_per_article {
                let len = rng.random_range(40..140);
                let mut body_words = Vec::with_capacity(len);
                for _ in 0..len {
                    if rng.random_bool(0.3) {
                        body_words.push(
                            FUNCTION_WORDS[rng.random_range(0..FUNCTION_WORDS.len())].to_owned(),
                        );
                    } else {
                        body_words.push(draw(&mut rng));
                    }
                }
                let mut context = String::new();
                for (i, w) in body_words.iter().enumerate() {
                    if i > 0 {
                        context.push_str(if rng.random_bool(0.08) { ", " } else { " " });
                    }
                    if rng.random_bool(0.05) {
                        let mut c = w.chars();
                        let first = c.next().unwrap().to_uppercase().collect::<String>();
                        context.push_str(&first);
                        context.push_str(c.as_str());
                    } else {
                        context.push_str(w);
                    }
                }
                context.push('.');
                if rng.random_bool(0.05) {
                    context.push_str(" <b>Note</b> &amp; 1990s.");
                }

                let mut qas = Vec::new();
                for _ in 0..self.questions_per_paragraph {
                    let n_from_paragraph = rng.random_range(2..7);
                    let mut q: Vec<String> = (0..n_from_paragraph)
                        .map(|_| body_words[rng.random_range(0..body_words.len())].clone())
                        .collect();
                    for _ in 0..rng.random_range(0..3) {
                        q.push(draw(&mut rng));
                    }
                    q.insert(0, "What".to_owned());
                    let is_impossible = rng.random_bool(0.33);
                    let question = format!("{}?", q.join(" "));
                    qas.push(json!({
                        "id": format!("syn{qid:06}"),
                        "question": question,
                        "is_impossible": is_impossible,
                        "answers": if is_impossible { json!([]) } else {
                            json!([{"text": body_words[0], "answer_start": 0}])
                        },
                    }));
                    qid += 1;
                }
                paragraphs.push(json!({ "context": context, "qas": qas }));
            }
            articles.push(json!({ "title": format!("Article_{a:03}"), "paragraphs": paragraphs }));
        }
        serde_json::to_string(&json!({ "version": "v2.0", "data": articles })).unwrap()
    }
}

/// Counts `(articles, paragraphs, questions)` of a SQuAD JSON document by
/// walking the raw JSON value.
pub fn count_squad(json_text: &str) -> (usize, usize, usize) {
    let value: serde_json::Value = serde_json::from_str(json_text).expect("valid JSON");
    let articles = value["data"].as_array().expect("data array");
    let paragraphs: Vec<&serde_json::Value> = articles
        .iter()
        .flat_map(|a| a["paragraphs"].as_array().unwrap().iter())
        .collect();
    let questions = paragraphs
        .iter()
        .map(|p| p["qas"].as_array().unwrap().len())
        .sum();
    (articles.len(), paragraphs.len(), questions)
}

/// Paragraph contexts keyed by `"{title}#{index}"`, read straight from the
/// JSON without deduplication.
pub fn squad_contexts(json_text: &str) -> BTreeMap<String, String> {
    let value: serde_json::Value = serde_json::from_str(json_text).expect("valid JSON");
    let mut out = BTreeMap::new();
    for article in value["data"].as_array().unwrap() {
        let title = article["title"].as_str().unwrap();
        for (i, p) in article["paragraphs"].as_array().unwrap().iter().enumerate() {
            out.insert(
                format!("{title}#{i}"),
                p["context"].as_str().unwrap().to_owned(),
            );
        }
    }
    out
}
