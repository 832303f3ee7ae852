use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tags::{coarse_tag, COARSE_TAGS};
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};

/// An ordering of the six coarse tags, each used exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRule {
    pub id: u32,
    pub tags: [String; 6],
    pub regex_text: String,
}

impl SentenceRule {
    fn new(id: u32, tags: [&str; 6]) -> Self {
        let regex_text = tags.iter().map(|t| format!("({t})+")).collect::<Vec<_>>().join(r"\S+");
        SentenceRule {
            id,
            tags: tags.map(String::from),
            regex_text,
        }
    }

    pub fn matches<S: AsRef<str>>(&self, coarse: &[S]) -> bool {
        is_subsequence(&self.tags, coarse)
    }
}

/// Whether `needle` occurs in `haystack` in order, gaps allowed.
pub fn is_subsequence<A: AsRef<str>, B: AsRef<str>>(needle: &[A], haystack: &[B]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h.as_ref() == n.as_ref()))
}

fn permutations(pool: &mut Vec<&'static str>, prefix: &mut Vec<&'static str>, out: &mut Vec<[&'static str; 6]>) {
    if pool.is_empty() {
        out.push(prefix.as_slice().try_into().expect("six tags"));
        return;
    }
    for i in 0..pool.len() {
        let t = pool.remove(i);
        prefix.push(t);
        permutations(pool, prefix, out);
        prefix.pop();
        pool.insert(i, t);
    }
}

/// All 720 rules, numbered from 1 in lexicographic order of their tag
/// sequences.
pub fn generate_sentence_rules() -> Vec<SentenceRule> {
    let mut out = Vec::with_capacity(720);
    permutations(&mut COARSE_TAGS.to_vec(), &mut Vec::new(), &mut out);
    out.into_iter()
        .enumerate()
        .map(|(i, tags)| SentenceRule::new(i as u32 + 1, tags))
        .collect()
}

/// Coarse tag sequence of a sentence, dropping tags outside the six.
pub fn coarse_sequence(sentence: &AnnotatedSentence) -> Vec<&'static str> {
    sentence.tokens.iter().filter_map(|t| coarse_tag(&t.upos)).collect()
}

/// Fraction of sentences each rule matches.
pub fn rule_probabilities(corpus: &[AnnotatedSentence], rules: &[SentenceRule]) -> Result<BTreeMap<u32, f64>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let counts = corpus
        .par_iter()
        .map(|s| {
            let seq = coarse_sequence(s);
            let mut hits = vec![0usize; rules.len()];
            if seq.len() >= 6 {
                for (h, r) in hits.iter_mut().zip(rules) {
                    *h = usize::from(r.matches(&seq));
                }
            }
            hits
        })
        .reduce(
            || vec![0usize; rules.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let n = corpus.len() as f64;
    Ok(rules.iter().zip(counts).map(|(r, c)| (r.id, c as f64 / n)).collect())
}
