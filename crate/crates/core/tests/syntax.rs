mod common;

use driftdet::corpus::{parse_conllu, write_conllu};
use driftdet::syntax_stats::{
    compare_stats, compute_stats, generate_sentence_rules, ner_dep_stats, render_report_text, verb_neighbourhood_patterns,
    BigramChunker, CompareOptions,
};

use common::*;

#[test]
fn example_sentence_patterns_and_entities() {
    let s = walkthrough_sentence();
    let patterns = verb_neighbourhood_patterns(std::slice::from_ref(&s)).unwrap();
    // "get" and "blame" are the VB-tagged units; "'s"/"are" are VBZ/VBP
    assert!(patterns.entries.contains_key("[RB][TO][VB]"), "{:?}", patterns.entries.keys());
    let stats = ner_dep_stats(std::slice::from_ref(&s)).unwrap();
    assert_eq!(stats.ner_freq.get("TIME"), Some(&4));
    let top = &stats.ner_dep_top2["TIME"];
    assert_eq!(top.len(), 2);
}

#[test]
fn conllu_round_trip_keeps_statistics() {
    let corpus = vec![walkthrough_sentence(), tagged_sentence(&["DT", "NN", "VBZ", "RB"])];
    let text = write_conllu(&corpus);
    let parsed = parse_conllu(&text).unwrap();
    let rules = generate_sentence_rules();
    let a = compute_stats(&corpus, &rules, None).unwrap();
    let b = compute_stats(&parsed, &rules, None).unwrap();
    assert_eq!(serde_json::to_value(&a).unwrap(), serde_json::to_value(&b).unwrap());
}

#[test]
fn report_sections_render() {
    let train: Vec<_> = (0..20).map(|_| tagged_sentence(&["DT", "NN", "VBZ", "DT", "NN"])).collect();
    let mut payload = train.clone();
    payload.push(walkthrough_sentence());
    let chunker = BigramChunker::train(&conll2000_corpus(300, 5)).unwrap();
    let rules = generate_sentence_rules();
    let t = compute_stats(&train, &rules, Some(&chunker)).unwrap();
    let p = compute_stats(&payload, &rules, Some(&chunker)).unwrap();
    let report = compare_stats(&t, &p, &CompareOptions::default());
    assert!(report.verb_patterns.new_patterns.iter().any(|r| r.pattern == "[RB][TO][VB]"));
    assert!(report.chunk_density.is_some());
    let text = render_report_text(&report);
    for section in ["Verb Neighbourhood Patterns", "New Sentence Rules", "NER Dependencies", "Chunk Density"] {
        assert!(text.contains(section), "missing {section}:\n{text}");
    }
}
