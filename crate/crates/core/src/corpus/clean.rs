use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};
use unicode_segmentation::UnicodeSegmentation;

use super::stopwords::is_stopword;
use super::Document;
use crate::error::{Error, Result};

static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b[a-z][a-z0-9+.\-]*://\S*|\bwww\.\S*").unwrap());
static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// A preprocessed document.
///
/// `tokens` feed word-vector backends; `sentence_text` feeds sentence
/// encoders and keeps stopwords, casing and punctuation. `spans[i]` is the
/// byte range in `sentence_text` of the word that produced `tokens[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanDocument {
    pub id: String,
    pub tokens: Vec<String>,
    pub sentence_text: String,
    pub spans: Vec<Range<usize>>,
}

impl CleanDocument {
    /// Builds a document directly from tokens; `sentence_text` is the tokens
    /// joined by single spaces.
    pub fn from_tokens<S: AsRef<str>>(id: impl Into<String>, tokens: &[S]) -> Self {
        let mut sentence_text = String::new();
        let mut spans = Vec::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if i > 0 {
                sentence_text.push(' ');
            }
            let start = sentence_text.len();
            sentence_text.push_str(tok.as_ref());
            spans.push(start..sentence_text.len());
        }
        CleanDocument {
            id: id.into(),
            tokens: tokens.iter().map(|t| t.as_ref().to_owned()).collect(),
            sentence_text,
            spans,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The document with the token at `position` deleted, both from the
    /// token stream and from `sentence_text`.
    pub fn without_position(&self, position: usize) -> CleanDocument {
        let span = self.spans[position].clone();
        let bytes = self.sentence_text.as_bytes();
        // swallow one neighbouring space so words do not fuse or double up
        let cut = if span.end < bytes.len() && bytes[span.end] == b' ' {
            span.start..span.end + 1
        } else if span.start > 0 && bytes[span.start - 1] == b' ' {
            span.start - 1..span.end
        } else {
            span.clone()
        };
        let removed = cut.end - cut.start;
        let mut sentence_text = String::with_capacity(self.sentence_text.len() - removed);
        sentence_text.push_str(&self.sentence_text[..cut.start]);
        sentence_text.push_str(&self.sentence_text[cut.end..]);

        let mut tokens = Vec::with_capacity(self.tokens.len().saturating_sub(1));
        let mut spans = Vec::with_capacity(self.spans.len().saturating_sub(1));
        for (i, (tok, s)) in self.tokens.iter().zip(&self.spans).enumerate() {
            if i == position {
                continue;
            }
            tokens.push(tok.clone());
            spans.push(if s.start >= cut.end {
                s.start - removed..s.end - removed
            } else {
                s.clone()
            });
        }
        CleanDocument {
            id: self.id.clone(),
            tokens,
            sentence_text,
            spans,
        }
    }
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32, 0x1F300..=0x1FAFF | 0x2600..=0x27BF | 0xFE0F)
}

/// Strips HTML tags, URLs and emoji, replacing each with a space, then
/// collapses whitespace.
pub(crate) fn strip_markup(text: &str) -> String {
    let no_html = HTML_TAG.replace_all(text, " ");
    let no_url = URL.replace_all(&no_html, " ");
    let no_emoji: String = no_url.chars().map(|c| if is_emoji(c) { ' ' } else { c }).collect();
    no_emoji.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn normalize_word(word: &str) -> String {
    word.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'")
}

/// Preprocesses a document.
///
/// With `for_word_vectors` set, stopwords are removed and the remaining
/// tokens stemmed; otherwise every word is kept as-is (lowercased).
pub fn clean(doc: &Document, for_word_vectors: bool) -> Result<CleanDocument> {
    let sentence_text = strip_markup(&doc.raw_text);
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    for (start, word) in sentence_text.unicode_word_indices() {
        let lower = normalize_word(word);
        let token = if for_word_vectors {
            if is_stopword(&lower) {
                continue;
            }
            let stem = STEMMER.stem(&lower).into_owned();
            if stem.is_empty() || is_stopword(&stem) {
                continue;
            }
            stem
        } else {
            lower
        };
        tokens.push(token);
        spans.push(start..start + word.len());
    }
    if tokens.is_empty() {
        return Err(Error::EmptyAfterCleaning(doc.id.clone()));
    }
    Ok(CleanDocument {
        id: doc.id.clone(),
        tokens,
        sentence_text,
        spans,
    })
}
