//! On-disk index format.
//!
//! ```text
//! magic    8 bytes  "RAGIDX01"
//! version  u32 LE
//! checksum 32 bytes SHA-256 of every byte after this field
//! then three sections, each a u64 LE byte length followed by
//! newline-delimited JSON: documents, postings, stats
//! ```
//!
//! See FORMAT.md at the repository root for the record layouts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{AnalyzerConfig, Term};
use crate::error::{Error, Result};
use crate::index::{
    DocumentId, IndexOptions, IndexSnapshot, Posting, PostingsList, StoredDocument,
};

pub const MAGIC: &[u8; 8] = b"RAGIDX01";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32;

#[derive(Serialize, Deserialize)]
struct PostingsRecord {
    term: Term,
    /// `[doc_id, term_frequency]` pairs.
    postings: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum StatsRecord {
    Analyzer(AnalyzerConfig),
    Options(IndexOptions),
    Corpus {
        n_docs: u32,
        avgdl: f64,
        total_length: u64,
        n_terms: usize,
    },
}

fn ndjson<T: Serialize>(records: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, &record).expect("index records serialize");
        out.push(b'\n');
    }
    out
}

/// Serializes a snapshot into the index file layout.
pub fn to_bytes(snapshot: &IndexSnapshot) -> Vec<u8> {
    let documents = ndjson(snapshot.documents());
    let postings = ndjson(snapshot.terms().map(|list| {
        PostingsRecord {
            term: list.term.clone(),
            postings: list
                .postings
                .iter()
                .map(|p| (p.doc_id.0, p.term_frequency))
                .collect(),
        }
    }));
    let stats = snapshot.stats();
    let meta = ndjson([
        StatsRecord::Analyzer(snapshot.analyzer().clone()),
        StatsRecord::Options(snapshot.options().clone()),
        StatsRecord::Corpus {
            n_docs: stats.n_docs,
            avgdl: stats.avgdl,
            total_length: stats.total_length,
            n_terms: stats.df.len(),
        },
    ]);

    let mut body = Vec::with_capacity(documents.len() + postings.len() + meta.len() + 24);
    for section in [&documents, &postings, &meta] {
        body.extend_from_slice(&(section.len() as u64).to_le_bytes());
        body.extend_from_slice(section);
    }

    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&body));
    out.extend_from_slice(&body);
    out
}

fn format_error(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn parse_lines<T: for<'de> Deserialize<'de>>(section: &[u8], name: &str) -> Result<Vec<T>> {
    section
        .split(|b| *b == b'\n')
        .filter(|line| !line.is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_slice(line)
                .map_err(|e| format_error(format!("{name} record {i}: {e}")))
        })
        .collect()
}

pub fn from_bytes(bytes: &[u8]) -> Result<IndexSnapshot> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(format_error("missing RAGIDX01 magic header"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(format_error(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let body = &bytes[HEADER_LEN..];
    if Sha256::digest(body).as_slice() != &bytes[12..HEADER_LEN] {
        return Err(format_error("checksum mismatch"));
    }

    let mut sections = Vec::with_capacity(3);
    let mut rest = body;
    for name in ["documents", "postings", "stats"] {
        if rest.len() < 8 {
            return Err(format_error(format!("truncated before {name} section")));
        }
        let len = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes"));
        let len = usize::try_from(len).map_err(|_| format_error("section too large"))?;
        rest = &rest[8..];
        if rest.len() < len {
            return Err(format_error(format!("{name} section truncated")));
        }
        sections.push(&rest[..len]);
        rest = &rest[len..];
    }
    if !rest.is_empty() {
        return Err(format_error("trailing bytes after stats section"));
    }

    let docs: Vec<StoredDocument> = parse_lines(sections[0], "documents")?;
    let postings: BTreeMap<Term, PostingsList> =
        parse_lines::<PostingsRecord>(sections[1], "postings")?
            .into_iter()
            .map(|r| {
                let list = PostingsList {
                    term: r.term.clone(),
                    postings: r
                        .postings
                        .into_iter()
                        .map(|(doc, tf)| Posting {
                            doc_id: DocumentId(doc),
                            term_frequency: tf,
                        })
                        .collect(),
                };
                (r.term, list)
            })
            .collect();

    let mut analyzer = None;
    let mut options = None;
    let mut corpus = None;
    for record in parse_lines::<StatsRecord>(sections[2], "stats")? {
        match record {
            StatsRecord::Analyzer(a) => analyzer = Some(a),
            StatsRecord::Options(o) => options = Some(o),
            StatsRecord::Corpus {
                n_docs,
                avgdl,
                total_length,
                n_terms,
            } => corpus = Some((n_docs, avgdl, total_length, n_terms)),
        }
    }
    let analyzer = analyzer.ok_or_else(|| format_error("stats section lacks analyzer record"))?;
    let options = options.ok_or_else(|| format_error("stats section lacks options record"))?;
    let (n_docs, avgdl, total_length, n_terms) =
        corpus.ok_or_else(|| format_error("stats section lacks corpus record"))?;

    // structural checks before from_parts, which indexes by doc id
    for (i, doc) in docs.iter().enumerate() {
        if doc.doc_id.index() != i {
            return Err(format_error(format!(
                "document {i} stored with id {}",
                doc.doc_id
            )));
        }
    }
    for list in postings.values() {
        if list.postings.iter().any(|p| p.doc_id.index() >= docs.len()) {
            return Err(format_error(format!(
                "postings for {} reference unknown documents",
                list.term
            )));
        }
        if list.postings.windows(2).any(|w| w[0].doc_id >= w[1].doc_id) {
            return Err(format_error(format!(
                "postings for {} are not sorted",
                list.term
            )));
        }
    }

    let snapshot = IndexSnapshot::from_parts(analyzer, options, docs, postings);
    let stats = snapshot.stats();
    if stats.n_docs != n_docs
        || stats.total_length != total_length
        || stats.avgdl.to_bits() != avgdl.to_bits()
        || stats.df.len() != n_terms
    {
        return Err(format_error(
            "stored corpus statistics disagree with index contents",
        ));
    }
    snapshot.check_consistency().map_err(format_error)?;
    Ok(snapshot)
}

/// Writes the snapshot to `path`, replacing any existing file.
pub fn persist(snapshot: &IndexSnapshot, path: &Path) -> Result<()> {
    let bytes = to_bytes(snapshot);
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<IndexSnapshot> {
    from_bytes(&fs::read(path)?)
}
