//! Bigram IOB phrase chunker trained on CoNLL-2000 style data
//! (`TOKEN POS CHUNKTAG` per line, blank line between sentences).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tags::ptb_tag;
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkToken {
    pub word: String,
    pub pos: String,
    pub chunk: String,
}

pub type ChunkSentence = Vec<ChunkToken>;

pub fn parse_conll2000(text: &str) -> Result<Vec<ChunkSentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [word, pos, chunk] = fields[..] else {
            return Err(Error::format(
                i + 1,
                format!("expected 3 columns (token POS chunk), found {}", fields.len()),
            ));
        };
        current.push(ChunkToken {
            word: word.to_owned(),
            pos: pos.to_owned(),
            chunk: chunk.to_owned(),
        });
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

pub fn load_conll2000(path: impl AsRef<Path>) -> Result<Vec<ChunkSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sentences = parse_conll2000(&text)?;
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(sentences)
}

pub fn write_conll2000(sentences: &[ChunkSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for t in s {
            let _ = writeln!(out, "{} {} {}", t.word, t.pos, t.chunk);
        }
        out.push('\n');
    }
    out
}

const SENTENCE_START: &str = "<S>";
pub const DEFAULT_CHUNK_TAG: &str = "O";

/// Most frequent chunk tag per (previous POS, POS), falling back to the
/// most frequent tag per POS and finally to `O`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigramChunker {
    bigram: BTreeMap<(String, String), String>,
    unigram: BTreeMap<String, String>,
}

type Tally = BTreeMap<String, usize>;

/// Highest count wins; ties go to the lexicographically smallest tag.
fn argmax(tally: Tally) -> String {
    tally
        .into_iter()
        .fold((String::new(), 0), |best, (tag, n)| if n > best.1 { (tag, n) } else { best })
        .0
}

impl BigramChunker {
    pub fn train(sentences: &[ChunkSentence]) -> Result<Self> {
        let mut bigram: BTreeMap<(String, String), Tally> = BTreeMap::new();
        let mut unigram: BTreeMap<String, Tally> = BTreeMap::new();
        for s in sentences {
            let mut prev = SENTENCE_START;
            for t in s {
                *bigram
                    .entry((prev.to_owned(), t.pos.clone()))
                    .or_default()
                    .entry(t.chunk.clone())
                    .or_insert(0) += 1;
                *unigram.entry(t.pos.clone()).or_default().entry(t.chunk.clone()).or_insert(0) += 1;
                prev = &t.pos;
            }
        }
        if unigram.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(BigramChunker {
            bigram: bigram.into_iter().map(|(k, v)| (k, argmax(v))).collect(),
            unigram: unigram.into_iter().map(|(k, v)| (k, argmax(v))).collect(),
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::train(&load_conll2000(path)?)
    }

    fn lookup(&self, prev: &str, pos: &str) -> &str {
        self.bigram
            .get(&(prev.to_owned(), pos.to_owned()))
            .or_else(|| self.unigram.get(pos))
            .map_or(DEFAULT_CHUNK_TAG, String::as_str)
    }

    pub fn tag<S: AsRef<str>>(&self, pos_tags: &[S]) -> Vec<String> {
        let mut prev = SENTENCE_START;
        pos_tags
            .iter()
            .map(|p| {
                let tag = self.lookup(prev, p.as_ref()).to_owned();
                prev = p.as_ref();
                tag
            })
            .collect()
    }

    /// Per-token chunk tag accuracy against gold tags.
    pub fn accuracy(&self, sentences: &[ChunkSentence]) -> f64 {
        let (mut right, mut total) = (0usize, 0usize);
        for s in sentences {
            let pos: Vec<&str> = s.iter().map(|t| t.pos.as_str()).collect();
            for (pred, gold) in self.tag(&pos).iter().zip(s) {
                right += usize::from(*pred == gold.chunk);
                total += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            right as f64 / total as f64
        }
    }
}

/// Counts maximal chunk spans per chunk type. `I-X` not preceded by a tag
/// of type X opens a new span.
pub fn count_chunks<S: AsRef<str>>(iob: &[S]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    let mut open: Option<&str> = None;
    for tag in iob {
        let tag = tag.as_ref();
        match tag.split_once('-') {
            Some(("B", kind)) => {
                *counts.entry(kind.to_owned()).or_insert(0) += 1;
                open = Some(kind);
            }
            Some(("I", kind)) => {
                if open != Some(kind) {
                    *counts.entry(kind.to_owned()).or_insert(0) += 1;
                    open = Some(kind);
                }
            }
            _ => open = None,
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkDensity {
    pub np_per_sentence: f64,
    pub vp_per_sentence: f64,
}

pub fn chunk_density(chunker: &BigramChunker, corpus: &[AnnotatedSentence]) -> Result<ChunkDensity> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (mut np, mut vp) = (0usize, 0usize);
    for s in corpus {
        let pos: Vec<&str> = s.tokens.iter().map(ptb_tag).collect();
        let counts = count_chunks(&chunker.tag(&pos));
        np += counts.get("NP").copied().unwrap_or(0);
        vp += counts.get("VP").copied().unwrap_or(0);
    }
    let n = corpus.len() as f64;
    Ok(ChunkDensity {
        np_per_sentence: np as f64 / n,
        vp_per_sentence: vp as f64 / n,
    })
}
