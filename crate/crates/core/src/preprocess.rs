//! Text cleaning and tokenization.
//!
//! `clean` removes URLs (`http://`, `https://` or `www.` up to the next
//! whitespace, case-insensitive) and mentions (`@` followed by word
//! characters), then lowercases. `tokenize` splits on everything that is not
//! a Unicode letter, digit, or ASCII apostrophe.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDocument;

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").expect("url pattern"));
static MENTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@\w+").expect("mention pattern"));

/// The bundled English stopword list (179 entries).
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

pub fn url_pattern() -> &'static Regex {
    &URL_RE
}

pub fn mention_pattern() -> &'static Regex {
    &MENTION_RE
}

/// Parse a stopword file: one token per line, `#` comment lines and blank
/// lines skipped, entries lowercased.
pub fn parse_stopwords<R: BufRead>(reader: R) -> std::io::Result<BTreeSet<String>> {
    let mut words = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.trim();
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        words.insert(word.to_lowercase());
    }
    Ok(words)
}

pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS.as_bytes()).expect("bundled stopword list is valid UTF-8")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub strip_urls: bool,
    pub strip_mentions: bool,
    pub lowercase: bool,
    pub strip_stopwords: bool,
    pub stopwords: BTreeSet<String>,
    pub min_token_len: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            strip_urls: true,
            strip_mentions: true,
            lowercase: true,
            strip_stopwords: true,
            stopwords: default_stopwords(),
            min_token_len: 1,
        }
    }
}

impl PreprocessConfig {
    /// Replace the stopword list; entries are lowercased.
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stopwords = words.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        self
    }
}

/// Ordered tokens produced by the pipeline. Every token is non-empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        TokenSequence { tokens }
    }

    pub fn as_slice(&self) -> &[String] {
        &self.tokens
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.tokens.iter()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.tokens
    }

    pub fn join(&self, sep: &str) -> String {
        self.tokens.join(sep)
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence::new(iter.into_iter().map(Into::into).collect())
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

fn strip_once(text: &str, config: &PreprocessConfig) -> String {
    let mut out = text.to_string();
    if config.strip_urls {
        out = URL_RE.replace_all(&out, "").into_owned();
    }
    if config.strip_mentions {
        out = MENTION_RE.replace_all(&out, "").into_owned();
    }
    out
}

/// Strip URLs and mentions, then lowercase. Whitespace outside removed spans
/// is preserved.
pub fn clean(text: &str, config: &PreprocessConfig) -> String {
    // Removing one span can splice together a new match ("www@x.a" -> "www.a"),
    // so strip until nothing changes.
    let mut current = strip_once(text, config);
    loop {
        let next = strip_once(&current, config);
        if next == current {
            break;
        }
        current = next;
    }
    if config.lowercase {
        current = current.to_lowercase();
    }
    current
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

pub fn tokenize(text: &str) -> TokenSequence {
    tokenize_with_min_len(text, 1)
}

/// Tokens shorter than `min_len` characters are dropped.
pub fn tokenize_with_min_len(text: &str, min_len: usize) -> TokenSequence {
    text.split(|c: char| !is_token_char(c))
        .filter(|t| !t.is_empty() && t.chars().count() >= min_len)
        .collect()
}

pub fn remove_stopwords(tokens: TokenSequence, stopwords: &BTreeSet<String>) -> TokenSequence {
    TokenSequence::new(
        tokens
            .into_inner()
            .into_iter()
            .filter(|t| !stopwords.contains(t))
            .collect(),
    )
}

/// clean -> tokenize -> stopword filter on raw text.
pub fn process_text(text: &str, config: &PreprocessConfig) -> TokenSequence {
    let tokens = tokenize_with_min_len(&clean(text, config), config.min_token_len);
    if config.strip_stopwords {
        remove_stopwords(tokens, &config.stopwords)
    } else {
        tokens
    }
}

pub fn run_pipeline(doc: &LabeledDocument, config: &PreprocessConfig) -> TokenSequence {
    process_text(&doc.text, config)
}
