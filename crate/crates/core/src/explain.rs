//! Sample-level explanations by word masking.
//!
//! Each token position is deleted in turn and the document re-scored. The
//! contribution of position `i` is `h_i = s_i - s`: a word whose removal
//! raises the similarity was pulling the document away from the training
//! distribution.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::detector::TrainedPipeline;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordContribution {
    pub token: String,
    pub position: usize,
    pub h: f64,
    pub s_masked: f64,
    /// Masking left nothing scorable; `s_masked` was recorded as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
    /// Byte range of the source word in [`SampleExplanation::text`].
    #[serde(skip)]
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleExplanation {
    pub doc_id: String,
    pub base_score: f64,
    /// Ordered by descending `h`, ties by position.
    pub contributions: Vec<WordContribution>,
    /// Cleaned sentence text the spans point into.
    #[serde(skip)]
    pub text: String,
}

/// Masks every token position of `doc` and records the score change.
pub fn explain_sample(pipe: &TrainedPipeline, doc: &Document) -> Result<SampleExplanation> {
    let clean = pipe.prepare(doc)?;
    let base = pipe.score_clean(&clean)?.score.value();
    let masked: Vec<_> = (0..clean.len()).map(|i| clean.without_position(i)).collect();
    let scores = pipe.score_clean_batch(&masked)?;

    let mut contributions: Vec<WordContribution> = scores
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let s_masked = s.score.value();
            WordContribution {
                token: clean.tokens[i].clone(),
                position: i,
                h: s_masked - base,
                s_masked,
                degenerate: s.flag.is_some(),
                span: clean.spans[i].clone(),
            }
        })
        .collect();
    contributions.sort_by(|a, b| b.h.total_cmp(&a.h).then(a.position.cmp(&b.position)));

    Ok(SampleExplanation {
        doc_id: doc.id.clone(),
        base_score: base,
        contributions,
        text: clean.sentence_text,
    })
}

pub const NO_POSITIVE_NOTE: &str = "no positive contributors";

const MARK_START: &str = "\x1b[1;31m";
const MARK_END: &str = "\x1b[0m";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightEntry {
    pub token: String,
    pub position: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Highlights {
    /// Sentence text with marked words wrapped in ANSI red.
    pub ansi: String,
    /// Same text with marked words wrapped in `[[` `]]`.
    pub plain: String,
    pub marked: Vec<HighlightEntry>,
    pub note: Option<&'static str>,
}

/// Marks the `top_k` tokens with positive contribution. Asking for more
/// than exist marks only the positive ones.
pub fn render_highlights(exp: &SampleExplanation, top_k: usize) -> Highlights {
    let marked: Vec<&WordContribution> = exp.contributions.iter().filter(|c| c.h > 0.0).take(top_k).collect();
    let note = marked.is_empty().then_some(NO_POSITIVE_NOTE);

    let mut spans: Vec<Range<usize>> = marked.iter().map(|c| c.span.clone()).collect();
    spans.sort_by_key(|r| r.start);
    let wrap = |open: &str, close: &str| {
        let mut out = String::with_capacity(exp.text.len() + spans.len() * 8);
        let mut cursor = 0;
        for r in &spans {
            if r.start < cursor || r.end > exp.text.len() {
                continue;
            }
            out.push_str(&exp.text[cursor..r.start]);
            out.push_str(open);
            out.push_str(&exp.text[r.clone()]);
            out.push_str(close);
            cursor = r.end;
        }
        out.push_str(&exp.text[cursor..]);
        out
    };

    Highlights {
        ansi: wrap(MARK_START, MARK_END),
        plain: wrap("[[", "]]"),
        marked: marked
            .iter()
            .map(|c| HighlightEntry {
                token: c.token.clone(),
                position: c.position,
                h: c.h,
            })
            .collect(),
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::ModelKind;
    use crate::detector::{train_pipeline_with_backend, BackendConfig, PipelineConfig};
    use crate::embeddings::{Backend, WordVectorTable};

    fn pipeline() -> TrainedPipeline {
        let table = WordVectorTable::from_parts(
            vec!["cat".into(), "dog".into(), "rock".into(), "mix".into()],
            2,
            vec![1.0, 0.0, 1.0, 0.1, 0.0, 1.0, 0.5, 0.5],
        )
        .unwrap();
        let config = PipelineConfig::new(BackendConfig::VectorFile { path: "-".into() }, ModelKind::Centroid);
        let docs = [Document::new("a", "cat dog"), Document::new("b", "dog cat cat")];
        train_pipeline_with_backend(&docs, &config, Backend::vector_file(table)).unwrap()
    }

    fn contribution(token: &str, position: usize, h: f64, span: Range<usize>) -> WordContribution {
        WordContribution {
            token: token.into(),
            position,
            h,
            s_masked: 0.5 + h,
            degenerate: false,
            span,
        }
    }

    #[test]
    fn one_entry_per_position_with_bookkeeping() {
        let pipe = pipeline();
        let exp = explain_sample(&pipe, &Document::new("p", "cat rock cat")).unwrap();
        assert_eq!(exp.contributions.len(), 3);
        // removing the off-topic word helps most
        assert_eq!(exp.contributions[0].token, "rock");
        assert!(exp.contributions[0].h > 0.0);
        for c in &exp.contributions {
            assert!((c.h - (c.s_masked - exp.base_score)).abs() < 1e-12);
        }
        let mut positions: Vec<_> = exp.contributions.iter().map(|c| c.position).collect();
        positions.sort();
        assert_eq!(positions, [0, 1, 2]);
        assert_eq!(exp, explain_sample(&pipe, &Document::new("p", "cat rock cat")).unwrap());
    }

    #[test]
    fn masking_the_mean_token_changes_nothing() {
        // "mix" equals the mean of "cat"=(1,0) and "rock"=(0,1) scaled; the
        // document mean of cat, rock, mix is (0.5, 0.5) = mix
        let pipe = pipeline();
        let exp = explain_sample(&pipe, &Document::new("p", "cat rock mix")).unwrap();
        let mix = exp.contributions.iter().find(|c| c.token == "mix").unwrap();
        assert!(mix.h.abs() < 1e-9, "{}", mix.h);
    }

    #[test]
    fn single_token_masking_is_degenerate() {
        let exp = explain_sample(&pipeline(), &Document::new("p", "rock")).unwrap();
        assert_eq!(exp.contributions.len(), 1);
        assert!(exp.contributions[0].degenerate);
        assert_eq!(exp.contributions[0].s_masked, 0.0);
    }

    #[test]
    fn empty_document_errors() {
        let err = explain_sample(&pipeline(), &Document::new("p", "the of")).unwrap_err();
        assert_eq!(err.kind(), "EmptyAfterCleaning");
    }

    #[test]
    fn top_k_marks_largest_positive() {
        let exp = SampleExplanation {
            doc_id: "d".into(),
            base_score: 0.5,
            contributions: vec![
                contribution("c", 2, 0.2, 4..5),
                contribution("a", 0, 0.1, 0..1),
                contribution("b", 1, -0.05, 2..3),
            ],
            text: "a b c".into(),
        };
        let h = render_highlights(&exp, 2);
        let tokens: Vec<_> = h.marked.iter().map(|m| m.token.as_str()).collect();
        assert_eq!(tokens, ["c", "a"]);
        assert_eq!(h.plain, "[[a]] b [[c]]");
        assert_eq!(h.ansi, "\x1b[1;31ma\x1b[0m b \x1b[1;31mc\x1b[0m");
        assert_eq!(h.note, None);
        assert_eq!(render_highlights(&exp, 10).marked.len(), 2);
    }

    #[test]
    fn no_positive_contributors() {
        let exp = SampleExplanation {
            doc_id: "d".into(),
            base_score: 0.5,
            contributions: vec![contribution("a", 0, 0.0, 0..1), contribution("b", 1, -0.1, 2..3)],
            text: "a b".into(),
        };
        let h = render_highlights(&exp, 3);
        assert!(h.marked.is_empty());
        assert_eq!(h.note, Some(NO_POSITIVE_NOTE));
        assert_eq!(h.plain, "a b");
    }

    #[test]
    fn json_schema() {
        let exp = explain_sample(&pipeline(), &Document::new("p", "cat rock")).unwrap();
        let v = serde_json::to_value(&exp).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["base_score", "contributions", "doc_id"]);
        let c = v["contributions"][0].as_object().unwrap();
        for k in ["token", "position", "h", "s_masked"] {
            assert!(c.contains_key(k), "{k}");
        }
    }
}
