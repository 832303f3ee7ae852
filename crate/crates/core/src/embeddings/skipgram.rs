//! Skip-gram word vectors with negative sampling.
//!
//! Training runs over a fixed number of document shards in parallel. Each
//! shard trains a private copy of the weights for one epoch from the same
//! starting point; the shard deltas are then summed into the global weights
//! in shard order. The shard count is part of the configuration, not derived
//! from the thread pool, so results depend only on the seed.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::WordVectorTable;
use crate::corpus::CleanDocument;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub learning_rate: f32,
    pub shards: usize,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 2,
            learning_rate: 0.025,
            shards: 4,
            seed: 42,
        }
    }
}

/// Trained vectors plus the mean negative-sampling loss of every epoch.
#[derive(Debug, Clone)]
pub struct SkipGramRun {
    pub table: WordVectorTable,
    pub epoch_losses: Vec<f64>,
}

pub fn train_skipgram(docs: &[CleanDocument], config: &SkipGramConfig) -> Result<WordVectorTable> {
    train_skipgram_with_history(docs, config).map(|run| run.table)
}

struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
}

fn build_vocab(docs: &[CleanDocument], min_count: usize) -> Result<Vocab> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for t in &doc.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut entries: Vec<(&str, u64)> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count.max(1) as u64)
        .map(|(&w, &c)| (w, c))
        .collect();
    if entries.is_empty() {
        entries = counts.iter().map(|(&w, &c)| (w, c)).collect();
    }
    if entries.len() < 2 {
        return Err(Error::DegenerateVocabulary {
            distinct: entries.len(),
        });
    }
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(Vocab {
        words: entries.iter().map(|(w, _)| (*w).to_owned()).collect(),
        counts: entries.iter().map(|(_, c)| *c).collect(),
    })
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x > 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Weights {
    input: Vec<f32>,
    output: Vec<f32>,
}

struct ShardResult {
    input_delta: Vec<f32>,
    output_delta: Vec<f32>,
    loss: f64,
    pairs: u64,
}

struct Trainer<'a> {
    config: &'a SkipGramConfig,
    noise: WeightedIndex<f64>,
    dim: usize,
}

impl Trainer<'_> {
    fn train_shard(
        &self,
        global: &Weights,
        sentences: &[Vec<u32>],
        epoch: usize,
        shard: usize,
    ) -> ShardResult {
        let dim = self.dim;
        let mut input = global.input.clone();
        let mut output = global.output.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.config
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((epoch as u64) << 20 | shard as u64),
        );
        let shard_words: usize = sentences.iter().map(Vec::len).sum::<usize>().max(1);
        let epochs = self.config.epochs as f32;
        let lr0 = self.config.learning_rate;
        let mut done = 0usize;
        let mut grad = vec![0f32; dim];
        let mut loss = 0f64;
        let mut pairs = 0u64;

        for sentence in sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                let progress = (epoch as f32 + done as f32 / shard_words as f32) / epochs;
                let lr = lr0 * (1.0 - progress).max(1e-4);
                done += 1;
                let reduce = rng.gen_range(0..self.config.window.max(1));
                let span = self.config.window.max(1) - reduce;
                let lo = pos.saturating_sub(span);
                let hi = (pos + span).min(sentence.len() - 1);
                for (ctx_pos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    let c = center as usize * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=self.config.negatives {
                        let (target, label) = if k == 0 {
                            (context as usize, 1.0f32)
                        } else {
                            let t = self.noise.sample(&mut rng);
                            if t == context as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let o = target * dim;
                        let score = dot(&input[c..c + dim], &output[o..o + dim]);
                        let p = sigmoid(score);
                        let term = if label > 0.5 { p } else { 1.0 - p };
                        loss -= (term.max(1e-7) as f64).ln();
                        let g = (label - p) * lr;
                        for d in 0..dim {
                            grad[d] += g * output[o + d];
                            output[o + d] += g * input[c + d];
                        }
                    }
                    for d in 0..dim {
                        input[c + d] += grad[d];
                    }
                    pairs += 1;
                }
            }
        }

        for (l, g) in input.iter_mut().zip(&global.input) {
            *l -= g;
        }
        for (l, g) in output.iter_mut().zip(&global.output) {
            *l -= g;
        }
        ShardResult {
            input_delta: input,
            output_delta: output,
            loss,
            pairs,
        }
    }
}

/// Trains skip-gram vectors and records the mean per-pair loss of each
/// epoch.
pub fn train_skipgram_with_history(
    docs: &[CleanDocument],
    config: &SkipGramConfig,
) -> Result<SkipGramRun> {
    if config.dim == 0 {
        return Err(Error::InvalidArgument("skip-gram dimension must be positive".into()));
    }
    if config.epochs == 0 || config.shards == 0 {
        return Err(Error::InvalidArgument("epochs and shards must be positive".into()));
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = build_vocab(docs, config.min_count)?;
    let index: HashMap<&str, u32> = vocab
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i as u32))
        .collect();
    let sentences: Vec<Vec<u32>> = docs
        .iter()
        .map(|d| d.tokens.iter().filter_map(|t| index.get(t.as_str()).copied()).collect::<Vec<_>>())
        .filter(|s: &Vec<u32>| s.len() >= 2)
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let dim = config.dim;
    let n = vocab.words.len();
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = Weights {
        input: (0..n * dim)
            .map(|_| (init_rng.gen::<f32>() - 0.5) / dim as f32)
            .collect(),
        output: vec![0.0; n * dim],
    };
    let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
        .expect("vocabulary counts are positive");
    let trainer = Trainer { config, noise, dim };

    let shard_len = sentences.len().div_ceil(config.shards);
    let shards: Vec<&[Vec<u32>]> = sentences.chunks(shard_len).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let results: Vec<ShardResult> = shards
            .par_iter()
            .enumerate()
            .map(|(s, chunk)| trainer.train_shard(&weights, chunk, epoch, s))
            .collect();
        let mut loss = 0.0;
        let mut pairs = 0;
        for r in &results {
            for (w, d) in weights.input.iter_mut().zip(&r.input_delta) {
                *w += d;
            }
            for (w, d) in weights.output.iter_mut().zip(&r.output_delta) {
                *w += d;
            }
            loss += r.loss;
            pairs += r.pairs;
        }
        let mean = if pairs > 0 { loss / pairs as f64 } else { 0.0 };
        log::debug!("skip-gram epoch {}: mean loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
    }

    Ok(SkipGramRun {
        table: WordVectorTable::from_parts(vocab.words, dim, weights.input)?,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(texts: &[&str]) -> Vec<CleanDocument> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| CleanDocument::from_tokens(format!("d{i}"), &t.split_whitespace().collect::<Vec<_>>()))
            .collect()
    }

    #[test]
    fn single_word_corpus_is_degenerate() {
        let err = train_skipgram(&docs(&["a a"]), &SkipGramConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateVocabulary { distinct: 1 }));
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(
            train_skipgram(&[], &SkipGramConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn min_count_falls_back_to_one() {
        let cfg = SkipGramConfig {
            dim: 4,
            ..Default::default()
        };
        let table = train_skipgram(&docs(&["alpha beta gamma"]), &cfg).unwrap();
        assert_eq!(table.len(), 3);
    }

    #[test]
    fn min_count_filters_rare_words() {
        let cfg = SkipGramConfig {
            dim: 4,
            ..Default::default()
        };
        let table = train_skipgram(&docs(&["a b c", "a b d"]), &cfg).unwrap();
        let mut words = table.words().to_vec();
        words.sort();
        assert_eq!(words, ["a", "b"]);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let corpus = docs(&["the cat sat on the mat", "the dog sat on the log", "a cat and a dog"]);
        let cfg = SkipGramConfig {
            dim: 8,
            min_count: 1,
            epochs: 3,
            ..Default::default()
        };
        let a = train_skipgram(&corpus, &cfg).unwrap();
        let b = train_skipgram(&corpus, &cfg).unwrap();
        assert_eq!(a, b);
        let other = train_skipgram(&corpus, &SkipGramConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.matrix(), other.matrix());
    }
}
