//! Dataset-level drift statistics over annotated corpora: verb
//! neighbourhood patterns, sentence rules, entity and dependency
//! frequencies, entity→dependency relations and phrase chunk densities.

mod chunker;
mod ner_dep;
mod patterns;
mod rules;
mod tags;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};

pub use chunker::{
    chunk_density, count_chunks, load_conll2000, parse_conll2000, write_conll2000, BigramChunker, ChunkDensity,
    ChunkSentence, ChunkToken, DEFAULT_CHUNK_TAG,
};
pub use ner_dep::{ner_dep_stats, top_n, NerDepStats};
pub use patterns::{
    chunk_np, chunk_tags, compare_patterns, sentence_patterns, verb_neighbourhood_patterns, ChunkedSentence,
    PatternComparison, PatternEntry, PatternRow, PatternTable, DEFAULT_NEW_PATTERN_THRESHOLD, TOP_PATTERNS,
};
pub use rules::{coarse_sequence, generate_sentence_rules, is_subsequence, rule_probabilities, SentenceRule};
pub use tags::{coarse_tag, entity_type, is_verb_tag, ptb_tag, COARSE_TAGS};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub sentence_count: usize,
    pub verb_patterns: PatternTable,
    pub rule_probs: BTreeMap<u32, f64>,
    pub ner_freq: BTreeMap<String, usize>,
    pub dep_freq: BTreeMap<String, usize>,
    pub ner_dep_top2: BTreeMap<String, Vec<String>>,
    /// Absent when no chunker was supplied.
    pub chunk_density: Option<ChunkDensity>,
}

pub fn compute_stats(
    corpus: &[AnnotatedSentence],
    rules: &[SentenceRule],
    chunker: Option<&BigramChunker>,
) -> Result<DatasetStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let nd = ner_dep_stats(corpus)?;
    Ok(DatasetStats {
        sentence_count: corpus.len(),
        verb_patterns: verb_neighbourhood_patterns(corpus)?,
        rule_probs: rule_probabilities(corpus, rules)?,
        ner_freq: nd.ner_freq,
        dep_freq: nd.dep_freq,
        ner_dep_top2: nd.ner_dep_top2,
        chunk_density: chunker.map(|c| chunk_density(c, corpus)).transpose()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    /// Payload patterns below this training probability are new.
    pub new_pattern_threshold: f64,
    /// A rule is new when its training probability is below this ...
    pub rule_train_max: f64,
    /// ... and its payload probability is at least this.
    pub rule_payload_min: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            new_pattern_threshold: DEFAULT_NEW_PATTERN_THRESHOLD,
            rule_train_max: 0.01,
            rule_payload_min: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRow {
    pub id: u32,
    pub regex_text: String,
    pub train_probability: f64,
    pub payload_probability: f64,
}

/// Share of one tag in its frequency table, train vs payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareDelta {
    pub tag: String,
    pub train_share: f64,
    pub payload_share: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerDepMismatch {
    pub ner: String,
    pub train_top2: Vec<String>,
    pub payload_top2: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkDensityDelta {
    pub train: ChunkDensity,
    pub payload: ChunkDensity,
    pub np_delta: f64,
    pub vp_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftStatisticsReport {
    pub schema_version: u32,
    pub train_sentences: usize,
    pub payload_sentences: usize,
    pub verb_patterns: PatternComparison,
    pub new_sentence_rules: Vec<RuleRow>,
    pub ner_shares: Vec<ShareDelta>,
    pub dep_shares: Vec<ShareDelta>,
    /// Payload minus train share of passive subjects, in percentage points.
    pub passive_delta_percent: f64,
    pub ner_dep_mismatches: Vec<NerDepMismatch>,
    pub chunk_density: Option<ChunkDensityDelta>,
    pub notes: Vec<String>,
}

fn shares(freq: &BTreeMap<String, usize>) -> BTreeMap<&str, f64> {
    let total: usize = freq.values().sum();
    freq.iter()
        .map(|(k, &v)| (k.as_str(), if total == 0 { 0.0 } else { v as f64 / total as f64 }))
        .collect()
}

fn share_deltas(train: &BTreeMap<String, usize>, payload: &BTreeMap<String, usize>) -> Vec<ShareDelta> {
    let (t, p) = (shares(train), shares(payload));
    let tags: BTreeSet<&str> = t.keys().chain(p.keys()).copied().collect();
    tags.into_iter()
        .map(|tag| {
            let ts = t.get(tag).copied().unwrap_or(0.0);
            let ps = p.get(tag).copied().unwrap_or(0.0);
            ShareDelta {
                tag: tag.to_owned(),
                train_share: ts,
                payload_share: ps,
                delta: ps - ts,
            }
        })
        .collect()
}

const PASSIVE_SUBJECTS: [&str; 2] = ["nsubjpass", "nsubj:pass"];

pub fn compare_stats(train: &DatasetStats, payload: &DatasetStats, opts: &CompareOptions) -> DriftStatisticsReport {
    let rule_text: BTreeMap<u32, String> = generate_sentence_rules()
        .into_iter()
        .map(|r| (r.id, r.regex_text))
        .collect();
    let new_sentence_rules = payload
        .rule_probs
        .iter()
        .filter_map(|(&id, &pp)| {
            let tp = train.rule_probs.get(&id).copied().unwrap_or(0.0);
            (tp < opts.rule_train_max && pp >= opts.rule_payload_min).then(|| RuleRow {
                id,
                regex_text: rule_text.get(&id).cloned().unwrap_or_default(),
                train_probability: tp,
                payload_probability: pp,
            })
        })
        .collect();

    let dep_shares = share_deltas(&train.dep_freq, &payload.dep_freq);
    let passive_delta_percent = 100.0
        * dep_shares
            .iter()
            .filter(|d| PASSIVE_SUBJECTS.contains(&d.tag.as_str()))
            .map(|d| d.delta)
            .sum::<f64>();

    let ner_dep_mismatches = payload
        .ner_dep_top2
        .iter()
        .filter_map(|(ner, p_top)| {
            let t_top = train.ner_dep_top2.get(ner).cloned().unwrap_or_default();
            let same = t_top.iter().collect::<BTreeSet<_>>() == p_top.iter().collect::<BTreeSet<_>>();
            (!same).then(|| NerDepMismatch {
                ner: ner.clone(),
                train_top2: t_top,
                payload_top2: p_top.clone(),
            })
        })
        .collect();

    let mut notes = Vec::new();
    let chunk_density = match (train.chunk_density, payload.chunk_density) {
        (Some(t), Some(p)) => Some(ChunkDensityDelta {
            train: t,
            payload: p,
            np_delta: p.np_per_sentence - t.np_per_sentence,
            vp_delta: p.vp_per_sentence - t.vp_per_sentence,
        }),
        _ => {
            notes.push("chunk density skipped: no chunker training data".to_owned());
            None
        }
    };

    DriftStatisticsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        train_sentences: train.sentence_count,
        payload_sentences: payload.sentence_count,
        verb_patterns: compare_patterns(&train.verb_patterns, &payload.verb_patterns, opts.new_pattern_threshold),
        new_sentence_rules,
        ner_shares: share_deltas(&train.ner_freq, &payload.ner_freq),
        dep_shares,
        passive_delta_percent,
        ner_dep_mismatches,
        chunk_density,
        notes,
    }
}

fn pct(p: f64) -> String {
    format!("{:.4} %", 100.0 * p)
}

/// Plain-text rendering with one section per statistic.
pub fn render_report_text(report: &DriftStatisticsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Drift statistics ({} train sentences, {} payload sentences)",
        report.train_sentences, report.payload_sentences
    );

    let _ = writeln!(out, "\n== Verb Neighbourhood Patterns ==");
    if report.verb_patterns.new_patterns.is_empty() {
        let _ = writeln!(out, "no new patterns");
    }
    for r in &report.verb_patterns.new_patterns {
        let _ = writeln!(
            out,
            "new  {:<32} train {:>10}  payload {:>10}",
            r.pattern,
            pct(r.train_probability),
            pct(r.payload_probability)
        );
    }
    let _ = writeln!(out, "-- top {} patterns --", report.verb_patterns.top.len());
    for r in &report.verb_patterns.top {
        let _ = writeln!(
            out,
            "     {:<32} train {:>10}  payload {:>10}",
            r.pattern,
            pct(r.train_probability),
            pct(r.payload_probability)
        );
    }

    let _ = writeln!(out, "\n== New Sentence Rules ==");
    if report.new_sentence_rules.is_empty() {
        let _ = writeln!(out, "no new rules");
    }
    for r in &report.new_sentence_rules {
        let _ = writeln!(
            out,
            "#{}: {}  train {}  payload {}",
            r.id,
            r.regex_text,
            pct(r.train_probability),
            pct(r.payload_probability)
        );
    }

    let _ = writeln!(out, "\n== NER Dependencies ==");
    if report.ner_dep_mismatches.is_empty() {
        let _ = writeln!(out, "no mismatches");
    }
    for m in &report.ner_dep_mismatches {
        let _ = writeln!(
            out,
            "{:<12} payload [{}]  train [{}]",
            m.ner,
            m.payload_top2.join(", "),
            m.train_top2.join(", ")
        );
    }

    for (title, rows) in [("NER Frequencies", &report.ner_shares), ("Dependency Frequencies", &report.dep_shares)] {
        let _ = writeln!(out, "\n== {title} (share of tokens) ==");
        for d in rows {
            let _ = writeln!(
                out,
                "{:<12} train {:>10}  payload {:>10}  delta {:+.4}",
                d.tag,
                pct(d.train_share),
                pct(d.payload_share),
                100.0 * d.delta
            );
        }
    }
    let passive = report.passive_delta_percent;
    let _ = writeln!(
        out,
        "payload is {:.2} percent {} passive than the training data",
        passive.abs(),
        if passive >= 0.0 { "more" } else { "less" }
    );

    let _ = writeln!(out, "\n== Chunk Density ==");
    match &report.chunk_density {
        Some(c) => {
            let _ = writeln!(
                out,
                "payload has {:.2} verb phrases per sentence as compared to {:.2} in the training data",
                c.payload.vp_per_sentence, c.train.vp_per_sentence
            );
            let _ = writeln!(
                out,
                "payload has {:.2} noun phrases per sentence as compared to {:.2} in the training data",
                c.payload.np_per_sentence, c.train.np_per_sentence
            );
        }
        None => {
            for n in &report.notes {
                let _ = writeln!(out, "{n}");
            }
        }
    }
    out
}
