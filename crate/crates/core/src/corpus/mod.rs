//! Corpus ingestion and text preprocessing.
//!
//! Raw corpora come in as plain lines or CSV and become [`Document`]s;
//! annotated corpora come in as CoNLL-U and become [`AnnotatedSentence`]s.
//! [`clean`] turns a document into the token stream the embedding backends
//! consume.

mod clean;
mod conllu;
mod stopwords;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{clean, CleanDocument};
pub use conllu::{load_annotated_corpus, parse_conllu, write_conllu, AnnotatedSentence, AnnotatedToken};
pub use stopwords::{is_stopword, stopwords};

/// A raw text unit, e.g. one review or one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            raw_text: raw_text.into(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// How a raw corpus file is laid out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CorpusFormat {
    /// UTF-8, one document per line.
    PlainLines,
    /// RFC-4180 CSV with a header row.
    Csv {
        text_column: String,
        #[serde(default)]
        label_column: Option<String>,
        #[serde(default)]
        id_column: Option<String>,
    },
}

impl CorpusFormat {
    pub fn csv(text_column: impl Into<String>, label_column: Option<&str>) -> Self {
        CorpusFormat::Csv {
            text_column: text_column.into(),
            label_column: label_column.map(str::to_owned),
            id_column: None,
        }
    }
}

/// Loads a raw corpus. Blank rows are skipped; rows without an id column get
/// `doc-<row>` where `row` is the 0-based source row.
pub fn load_corpus(path: impl AsRef<Path>, format: &CorpusFormat) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let docs = match format {
        CorpusFormat::PlainLines => {
            let text = fs::read_to_string(path).map_err(|e| read_error(path, e))?;
            parse_plain_lines(&text)
        }
        CorpusFormat::Csv {
            text_column,
            label_column,
            id_column,
        } => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            parse_csv(file, text_column, label_column.as_deref(), id_column.as_deref())?
        }
    };
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut seen = HashSet::with_capacity(docs.len());
    for doc in &docs {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::DuplicateId(doc.id.clone()));
        }
    }
    Ok(docs)
}

fn read_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::InvalidData {
        Error::format(0, format!("{} is not valid UTF-8", path.display()))
    } else {
        Error::io(PathBuf::from(path), e)
    }
}

pub fn parse_plain_lines(text: &str) -> Vec<Document> {
    text.lines()
        .enumerate()
        .filter_map(|(row, line)| {
            let line = line.trim();
            (!line.is_empty()).then(|| Document::new(format!("doc-{row}"), line))
        })
        .collect()
}

pub fn parse_csv<R: std::io::Read>(
    reader: R,
    text_column: &str,
    label_column: Option<&str>,
    id_column: Option<&str>,
) -> Result<Vec<Document>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(csv_line(&e).unwrap_or(1), e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::format(1, format!("missing column {name:?}")))
    };
    let text_idx = column(text_column)?;
    let label_idx = label_column.map(column).transpose()?;
    let id_idx = id_column.map(column).transpose()?;

    let mut docs = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        // header is line 1, first data row is line 2
        let record = record.map_err(|e| Error::format(csv_line(&e).unwrap_or(row + 2), e.to_string()))?;
        let text = record.get(text_idx).unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let id = match id_idx.and_then(|i| record.get(i)).map(str::trim) {
            Some(id) if !id.is_empty() => id.to_owned(),
            _ => format!("doc-{row}"),
        };
        let label = label_idx
            .and_then(|i| record.get(i))
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned);
        docs.push(Document {
            id,
            raw_text: text.to_owned(),
            label,
        });
    }
    Ok(docs)
}

fn csv_line(e: &csv::Error) -> Option<usize> {
    e.position().map(|p| p.line() as usize)
}
