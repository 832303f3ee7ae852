use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tags::entity_type;
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerDepStats {
    /// Entity tokens per entity type.
    pub ner_freq: BTreeMap<String, usize>,
    /// Tokens per dependency relation.
    pub dep_freq: BTreeMap<String, usize>,
    /// The two most frequent relations of each entity type's tokens.
    pub ner_dep_top2: BTreeMap<String, Vec<String>>,
}

/// Keys ranked by count descending, then lexicographically.
pub fn top_n(counts: &BTreeMap<String, usize>, n: usize) -> Vec<String> {
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(n).map(|(k, _)| k.clone()).collect()
}

pub fn ner_dep_stats(corpus: &[AnnotatedSentence]) -> Result<NerDepStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut stats = NerDepStats::default();
    let mut per_entity: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for token in corpus.iter().flat_map(|s| &s.tokens) {
        *stats.dep_freq.entry(token.dep.clone()).or_insert(0) += 1;
        if let Some(ent) = entity_type(&token.ner) {
            *stats.ner_freq.entry(ent.to_owned()).or_insert(0) += 1;
            *per_entity
                .entry(ent.to_owned())
                .or_default()
                .entry(token.dep.clone())
                .or_insert(0) += 1;
        }
    }
    stats.ner_dep_top2 = per_entity.into_iter().map(|(k, deps)| (k, top_n(&deps, 2))).collect();
    Ok(stats)
}
