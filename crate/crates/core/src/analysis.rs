//! Text normalization shared by indexing and querying.
//!
//! The pipeline is fixed: HTML stripping (optional), tokenization on maximal
//! runs of Unicode letters and digits, lowercasing (optional), stopword
//! removal. Documents and queries must go through the same [`AnalyzerConfig`]
//! or their terms will not line up.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Classic English function words used when no stopword file is given.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have", "he",
    "her", "his", "if", "in", "into", "is", "it", "its", "no", "not", "of", "on", "or", "she",
    "such", "that", "the", "their", "then", "there", "these", "they", "this", "to", "was", "were",
    "which", "will", "with",
];

/// A normalized token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Term(String);

impl Term {
    pub fn new(text: impl Into<String>) -> Self {
        Term(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Term {
    fn from(s: &str) -> Self {
        Term(s.to_owned())
    }
}

impl std::borrow::Borrow<str> for Term {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub lowercase: bool,
    pub strip_html: bool,
    /// Always stored lowercase.
    pub stopwords: BTreeSet<String>,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            lowercase: true,
            strip_html: true,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| (*s).to_owned()).collect(),
        }
    }
}

impl AnalyzerConfig {
    /// Lowercasing and HTML stripping on, no stopwords.
    pub fn without_stopwords() -> Self {
        AnalyzerConfig {
            stopwords: BTreeSet::new(),
            ..Default::default()
        }
    }

    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stopwords = words
            .into_iter()
            .map(|w| w.as_ref().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        self
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn analyze(&self, raw: &str) -> Vec<Term> {
        analyze(raw, self)
    }
}

/// Parses a stopword list: one term per line, `#` starts a comment line,
/// blank lines ignored. Terms are lowercased on the way in.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stopwords(path: &Path) -> io::Result<BTreeSet<String>> {
    Ok(parse_stopwords(&std::fs::read_to_string(path)?))
}

/// Replaces every tag span `<...>` with a single space and decodes the
/// common character entities.
///
/// A `<` only opens a tag when followed by a letter, `/`, `!` or `?`, so
/// prose like `a < b` survives. An opener with no closing `>` is kept
/// verbatim.
pub fn strip_html(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(open) = rest.find('<') {
        let after = &rest[open + 1..];
        let opens_tag = after
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || matches!(c, '/' | '!' | '?'));
        match (opens_tag, after.find('>')) {
            (true, Some(close)) => {
                out.push_str(&rest[..open]);
                out.push(' ');
                rest = &after[close + 1..];
            }
            _ => {
                out.push_str(&rest[..=open]);
                rest = after;
            }
        }
    }
    out.push_str(rest);
    decode_entities(&out)
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        match decode_one_entity(tail) {
            Some((decoded, consumed)) => {
                out.push(decoded);
                rest = &tail[consumed..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// `tail` starts with `&`. Returns the decoded char and the byte length of
/// the entity including the trailing `;`.
fn decode_one_entity(tail: &str) -> Option<(char, usize)> {
    let semi = tail.bytes().take(12).position(|b| b == b';')?;
    let name = &tail[1..semi];
    let decoded = match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        _ => {
            let digits = name.strip_prefix('#')?;
            let code = match digits.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => digits.parse::<u32>().ok()?,
            };
            char::from_u32(code)?
        }
    };
    Some((decoded, semi + 1))
}

/// Splits on everything that is not a Unicode letter or digit.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
}

pub fn analyze(raw: &str, config: &AnalyzerConfig) -> Vec<Term> {
    let stripped;
    let text = if config.strip_html {
        stripped = strip_html(raw);
        stripped.as_str()
    } else {
        raw
    };
    tokenize(text)
        .map(|token| {
            if config.lowercase {
                token.to_lowercase()
            } else {
                token.to_owned()
            }
        })
        .filter(|token| !config.is_stopword(token))
        .map(Term)
        .collect()
}
