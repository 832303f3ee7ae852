use crate::corpus::AnnotatedToken;

/// Penn Treebank tag for a token. Tokens without a fine-grained tag carry
/// their UPOS in `ptb_tag`; those are mapped to the closest PTB tag.
pub fn ptb_tag(token: &AnnotatedToken) -> &str {
    if token.ptb_tag != token.upos {
        return &token.ptb_tag;
    }
    upos_to_ptb(&token.upos).unwrap_or(&token.ptb_tag)
}

fn upos_to_ptb(upos: &str) -> Option<&'static str> {
    Some(match upos {
        "NOUN" => "NN",
        "PROPN" => "NNP",
        "VERB" | "AUX" => "VB",
        "ADJ" => "JJ",
        "ADV" => "RB",
        "DET" => "DT",
        "PRON" => "PRP",
        "ADP" | "SCONJ" => "IN",
        "CCONJ" => "CC",
        "NUM" => "CD",
        "PART" => "RP",
        "PUNCT" => ".",
        "INTJ" => "UH",
        "SYM" => "SYM",
        "X" => "FW",
        _ => return None,
    })
}

pub fn is_verb_tag(tag: &str) -> bool {
    matches!(tag, "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" | "VERB" | "AUX")
}

pub(crate) fn is_noun_tag(tag: &str) -> bool {
    matches!(tag, "NN" | "NNS" | "NNP" | "NNPS")
}

pub(crate) fn is_adjective_tag(tag: &str) -> bool {
    matches!(tag, "JJ" | "JJR" | "JJS")
}

/// The six coarse tags used by sentence rules, in lexicographic order.
pub const COARSE_TAGS: [&str; 6] = ["ADJ", "ADV", "DET", "NOUN", "PRON", "VERB"];

/// Coarse tag of a UPOS label, or `None` for tags the rules ignore.
/// Proper nouns count as nouns and auxiliaries as verbs.
pub fn coarse_tag(upos: &str) -> Option<&'static str> {
    Some(match upos {
        "ADJ" => "ADJ",
        "ADV" => "ADV",
        "DET" => "DET",
        "NOUN" | "PROPN" => "NOUN",
        "PRON" => "PRON",
        "VERB" | "AUX" => "VERB",
        _ => return None,
    })
}

/// Entity type without its BIO/BILOU prefix; `None` outside entities.
pub fn entity_type(ner: &str) -> Option<&str> {
    if ner.is_empty() || ner == "O" || ner == "_" {
        return None;
    }
    let stripped = match ner.split_once('-') {
        Some((prefix, rest)) if matches!(prefix, "B" | "I" | "E" | "S" | "L" | "U") => rest,
        _ => ner,
    };
    (!stripped.is_empty()).then_some(stripped)
}
