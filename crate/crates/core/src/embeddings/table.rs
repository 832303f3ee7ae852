use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Word → vector lookup backed by one row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f32>,
    dim: usize,
}

impl WordVectorTable {
    /// Builds a table from parallel word/row data. `matrix` is row-major
    /// with `words.len()` rows of width `dim`.
    pub fn from_parts(words: Vec<String>, dim: usize, matrix: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("vector dimension must be positive".into()));
        }
        if matrix.len() != words.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: words.len() * dim,
                found: matrix.len(),
            });
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value for word {:?}",
                words[pos / dim]
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate word {w:?}")));
            }
        }
        Ok(WordVectorTable {
            words,
            index,
            matrix,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index_of(word).map(|i| self.row(i))
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f32) -> WordVectorTable {
        let mut out = self.clone();
        out.matrix.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Writes word2vec text format with an `N D` header.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::with_capacity(self.matrix.len() * 10);
        let _ = writeln!(out, "{} {}", self.words.len(), self.dim);
        for (i, word) in self.words.iter().enumerate() {
            out.push_str(word);
            for v in self.row(i) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads word2vec text format. The `N D` header is optional; without it
    /// the dimension is inferred from the first row (GloVe layout).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = parse_vector_text(&text)?;
        if parsed.duplicates > 0 {
            log::warn!(
                "{}: {} duplicate word(s) ignored, first occurrence kept",
                path.display(),
                parsed.duplicates
            );
        }
        Ok(parsed.table)
    }
}

/// Result of parsing a vector file, including how many duplicate rows were
/// dropped.
#[derive(Debug)]
pub struct ParsedVectors {
    pub table: WordVectorTable,
    pub duplicates: usize,
}

pub fn parse_vector_text(text: &str) -> Result<ParsedVectors> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let mut dim = None;
    if let Some(&(_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split_whitespace().collect();
        if fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            let d: usize = fields[1].parse().unwrap();
            if d == 0 {
                return Err(Error::format(1, "header declares dimension 0"));
            }
            dim = Some(d);
            lines.next();
        }
    }

    let mut words = Vec::new();
    let mut matrix = Vec::new();
    let mut index: HashMap<String, ()> = HashMap::new();
    let mut duplicates = 0;
    for (line_no, line) in lines {
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap();
        let values = fields
            .map(|f| {
                f.parse::<f32>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::format(line_no, format!("bad number {f:?}")))
            })
            .collect::<Result<Vec<f32>>>()?;
        let d = *dim.get_or_insert(values.len());
        if d == 0 {
            return Err(Error::format(line_no, "row has no values"));
        }
        if values.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: values.len(),
            });
        }
        if index.insert(word.to_owned(), ()).is_some() {
            duplicates += 1;
            continue;
        }
        words.push(word.to_owned());
        matrix.extend(values);
    }
    let Some(dim) = dim else {
        return Err(Error::format(1, "vector file has no rows"));
    };
    if words.is_empty() {
        return Err(Error::format(1, "vector file has no rows"));
    }
    Ok(ParsedVectors {
        table: WordVectorTable::from_parts(words, dim, matrix)?,
        duplicates,
    })
}
