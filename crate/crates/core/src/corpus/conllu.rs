use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One token of a CoNLL-U sentence. Tags come from upstream tools.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub form: String,
    pub lemma: String,
    /// Universal POS tag.
    pub upos: String,
    /// Fine-grained (Penn Treebank) tag; equal to `upos` when the XPOS
    /// column is empty.
    pub ptb_tag: String,
    /// Entity label, `"O"` outside entities.
    pub ner: String,
    pub dep: String,
    /// 1-based index of the head token, 0 for the root.
    pub head: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub tokens: Vec<AnnotatedToken>,
}

impl AnnotatedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.form.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn load_annotated_corpus(path: impl AsRef<Path>) -> Result<Vec<AnnotatedSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sentences = parse_conllu(&text)?;
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(sentences)
}

/// Parses CoNLL-U text. Comment lines, multiword-token ranges (`3-4`) and
/// empty nodes (`5.1`) are skipped.
pub fn parse_conllu(text: &str) -> Result<Vec<AnnotatedSentence>> {
    let mut sentences = Vec::new();
    let mut current: Vec<AnnotatedToken> = Vec::new();
    let mut current_lines: Vec<usize> = Vec::new();

    let mut finish = |tokens: &mut Vec<AnnotatedToken>, lines: &mut Vec<usize>| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let n = tokens.len();
        if let Some(pos) = tokens.iter().position(|t| t.head > n) {
            return Err(Error::format(
                lines[pos],
                format!("head {} outside sentence of {n} tokens", tokens[pos].head),
            ));
        }
        sentences.push(AnnotatedSentence {
            tokens: std::mem::take(tokens),
        });
        lines.clear();
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut current, &mut current_lines)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::format(
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| Error::format(line_no, format!("bad token id {:?}", cols[0])))?;
        if id != current.len() + 1 {
            return Err(Error::format(
                line_no,
                format!("token id {id} out of sequence, expected {}", current.len() + 1),
            ));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::format(line_no, format!("bad head {:?}", cols[6])))?;
        let dep = cols[7].trim();
        if dep.is_empty() {
            return Err(Error::format(line_no, "empty dependency relation"));
        }
        let upos = cols[3].to_owned();
        let ptb_tag = match cols[4] {
            "_" | "" => upos.clone(),
            x => x.to_owned(),
        };
        let ner = cols[9]
            .split('|')
            .find_map(|kv| kv.strip_prefix("NER="))
            .filter(|v| !v.is_empty())
            .unwrap_or("O")
            .to_owned();
        current.push(AnnotatedToken {
            form: cols[1].to_owned(),
            lemma: cols[2].to_owned(),
            upos,
            ptb_tag,
            ner,
            dep: dep.to_owned(),
            head,
        });
        current_lines.push(line_no);
    }
    finish(&mut current, &mut current_lines)?;
    Ok(sentences)
}

/// Serializes sentences as CoNLL-U; NER goes into MISC as `NER=<label>`.
pub fn write_conllu(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for (i, t) in sentence.tokens.iter().enumerate() {
            let misc = if t.ner == "O" {
                "_".to_owned()
            } else {
                format!("NER={}", t.ner)
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t_\t{}\t{}\t_\t{}",
                i + 1,
                t.form,
                t.lemma,
                t.upos,
                t.ptb_tag,
                t.head,
                t.dep,
                misc
            );
        }
        out.push('\n');
    }
    out
}
