use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tags::{is_adjective_tag, is_noun_tag, is_verb_tag, ptb_tag};
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};

/// A sentence after NP chunking: each unit is `"NP"` or a residual tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkedSentence {
    pub units: Vec<String>,
}

/// Greedy left-to-right NP chunking over a PTB tag sequence using the
/// grammar `DT? (JJ|JJR|JJS)* (NN|NNS|NNP|NNPS)+`.
pub fn chunk_tags<S: AsRef<str>>(tags: &[S]) -> ChunkedSentence {
    let tags: Vec<&str> = tags.iter().map(AsRef::as_ref).collect();
    let mut units = Vec::with_capacity(tags.len());
    let mut i = 0;
    while i < tags.len() {
        let mut j = i;
        if tags[j] == "DT" {
            j += 1;
        }
        while j < tags.len() && is_adjective_tag(tags[j]) {
            j += 1;
        }
        let nouns_start = j;
        while j < tags.len() && is_noun_tag(tags[j]) {
            j += 1;
        }
        if j > nouns_start {
            units.push("NP".to_owned());
            i = j;
        } else {
            units.push(tags[i].to_owned());
            i += 1;
        }
    }
    ChunkedSentence { units }
}

pub fn chunk_np(sentence: &AnnotatedSentence) -> ChunkedSentence {
    let tags: Vec<&str> = sentence.tokens.iter().map(ptb_tag).collect();
    chunk_tags(&tags)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub count: usize,
    pub probability: f64,
}

/// Pattern → count and probability (`count / total`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternTable {
    pub entries: BTreeMap<String, PatternEntry>,
    pub total: usize,
}

impl PatternTable {
    pub fn from_counts(counts: BTreeMap<String, usize>) -> Self {
        let total: usize = counts.values().sum();
        let entries = counts
            .into_iter()
            .map(|(pattern, count)| {
                (
                    pattern,
                    PatternEntry {
                        count,
                        probability: count as f64 / total as f64,
                    },
                )
            })
            .collect();
        PatternTable { entries, total }
    }

    pub fn probability(&self, pattern: &str) -> f64 {
        self.entries.get(pattern).map_or(0.0, |e| e.probability)
    }

    pub fn count(&self, pattern: &str) -> usize {
        self.entries.get(pattern).map_or(0, |e| e.count)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Window of up to two units either side of every verb unit. Verb tags are
/// written as `VB` regardless of tense.
pub fn sentence_patterns(chunked: &ChunkedSentence) -> Vec<String> {
    let label = |u: &str| if is_verb_tag(u) { "VB".to_owned() } else { u.to_owned() };
    let units = &chunked.units;
    (0..units.len())
        .filter(|&v| is_verb_tag(&units[v]))
        .map(|v| {
            let lo = v.saturating_sub(2);
            let hi = (v + 2).min(units.len() - 1);
            units[lo..=hi].iter().map(|u| format!("[{}]", label(u))).collect()
        })
        .collect()
}

pub fn verb_neighbourhood_patterns(corpus: &[AnnotatedSentence]) -> Result<PatternTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts = BTreeMap::new();
    for sentence in corpus {
        for p in sentence_patterns(&chunk_np(sentence)) {
            *counts.entry(p).or_insert(0) += 1;
        }
    }
    Ok(PatternTable::from_counts(counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub pattern: String,
    pub train_probability: f64,
    pub payload_probability: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternComparison {
    /// Patterns seen in both corpora.
    pub common: Vec<PatternRow>,
    /// Payload patterns rare or absent in training.
    pub new_patterns: Vec<PatternRow>,
    /// Most frequent patterns over both corpora, side by side.
    pub top: Vec<PatternRow>,
}

pub const DEFAULT_NEW_PATTERN_THRESHOLD: f64 = 0.01;
pub const TOP_PATTERNS: usize = 25;

fn row(pattern: &str, train: &PatternTable, payload: &PatternTable) -> PatternRow {
    let t = train.probability(pattern);
    let p = payload.probability(pattern);
    PatternRow {
        pattern: pattern.to_owned(),
        train_probability: t,
        payload_probability: p,
        delta: p - t,
    }
}

/// A payload pattern is new when its training probability is below
/// `new_threshold` and the payload uses it more often than training does.
pub fn compare_patterns(train: &PatternTable, payload: &PatternTable, new_threshold: f64) -> PatternComparison {
    let common = payload
        .entries
        .keys()
        .filter(|k| train.entries.contains_key(*k))
        .map(|k| row(k, train, payload))
        .collect();
    let new_patterns = payload
        .entries
        .keys()
        .map(|k| row(k, train, payload))
        .filter(|r| r.train_probability < new_threshold && r.payload_probability > r.train_probability)
        .collect();
    let mut top: Vec<PatternRow> = train
        .entries
        .keys()
        .chain(payload.entries.keys().filter(|k| !train.entries.contains_key(*k)))
        .map(|k| row(k, train, payload))
        .collect();
    top.sort_by(|a, b| {
        (b.train_probability + b.payload_probability)
            .total_cmp(&(a.train_probability + a.payload_probability))
            .then_with(|| a.pattern.cmp(&b.pattern))
    });
    top.truncate(TOP_PATTERNS);
    PatternComparison {
        common,
        new_patterns,
        top,
    }
}
