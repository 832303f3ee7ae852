//! Document embeddings from three interchangeable sources: natively trained
//! skip-gram vectors, pretrained vector files, and a remote provider.

mod remote;
mod skipgram;
mod table;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CleanDocument;
use crate::error::{Error, Result};

pub use remote::{RemoteProvider, PROVIDER_URL_ENV};
pub use skipgram::{train_skipgram, train_skipgram_with_history, SkipGramConfig, SkipGramRun};
pub use table::{parse_vector_text, ParsedVectors, WordVectorTable};

/// A fixed-width, finite document embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("embedding must have positive dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    NativeSkipgram,
    VectorFile,
    RemoteSentence,
    RemoteTokenAvg,
}

impl BackendKind {
    pub fn is_remote(self) -> bool {
        matches!(self, BackendKind::RemoteSentence | BackendKind::RemoteTokenAvg)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::NativeSkipgram => "native-skipgram",
            BackendKind::VectorFile => "vector-file",
            BackendKind::RemoteSentence => "remote-sentence",
            BackendKind::RemoteTokenAvg => "remote-token-avg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub pooling: Pooling,
}

#[derive(Debug, Clone)]
enum Source {
    Table(Arc<WordVectorTable>),
    Remote(RemoteProvider),
}

/// A ready-to-use embedding backend.
#[derive(Debug, Clone)]
pub struct Backend {
    kind: BackendKind,
    source: Source,
}

impl Backend {
    pub fn native(table: WordVectorTable) -> Self {
        Backend {
            kind: BackendKind::NativeSkipgram,
            source: Source::Table(Arc::new(table)),
        }
    }

    pub fn vector_file(table: WordVectorTable) -> Self {
        Backend {
            kind: BackendKind::VectorFile,
            source: Source::Table(Arc::new(table)),
        }
    }

    pub fn remote(kind: BackendKind, provider: RemoteProvider) -> Result<Self> {
        if !kind.is_remote() {
            return Err(Error::InvalidArgument(format!(
                "{} is not a remote backend kind",
                kind.as_str()
            )));
        }
        Ok(Backend {
            kind,
            source: Source::Remote(provider),
        })
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.source {
            Source::Table(t) => t.dim(),
            Source::Remote(p) => p.dim(),
        }
    }

    pub fn table(&self) -> Option<&WordVectorTable> {
        match &self.source {
            Source::Table(t) => Some(t),
            Source::Remote(_) => None,
        }
    }

    pub fn provider(&self) -> Option<&RemoteProvider> {
        match &self.source {
            Source::Remote(p) => Some(p),
            Source::Table(_) => None,
        }
    }

    pub fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: self.kind,
            dim: self.dim(),
            endpoint: self.provider().map(|p| p.endpoint().to_owned()),
            pooling: Pooling::Mean,
        }
    }

    /// Whether documents for this backend should go through the
    /// word-vector preprocessing path (stopword removal + stemming).
    pub fn wants_word_vector_tokens(&self) -> bool {
        matches!(self.kind, BackendKind::NativeSkipgram | BackendKind::VectorFile)
    }
}

/// Arithmetic mean of the vectors of the in-vocabulary tokens. Rows are
/// summed in vocabulary-index order so the result does not depend on token
/// order.
pub fn mean_pool<S: AsRef<str>>(table: &WordVectorTable, tokens: &[S]) -> Option<Vec<f64>> {
    let mut rows: Vec<usize> = tokens
        .iter()
        .filter_map(|t| table.index_of(t.as_ref()))
        .collect();
    if rows.is_empty() {
        return None;
    }
    rows.sort_unstable();
    let mut sum = vec![0f64; table.dim()];
    for &r in &rows {
        for (s, &v) in sum.iter_mut().zip(table.row(r)) {
            *s += v as f64;
        }
    }
    let n = rows.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Some(sum)
}

fn mean_of(vectors: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut sum = vec![0f64; dim];
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    sum
}

pub fn embed_document(doc: &CleanDocument, backend: &Backend) -> Result<EmbeddingVector> {
    match &backend.source {
        Source::Table(table) => mean_pool(table, &doc.tokens)
            .ok_or_else(|| Error::NoRepresentableTokens(doc.id.clone()))
            .and_then(EmbeddingVector::new),
        Source::Remote(provider) => match backend.kind {
            BackendKind::RemoteSentence => {
                let mut out = provider.embed_texts(std::slice::from_ref(&doc.sentence_text))?;
                EmbeddingVector::new(out.pop().expect("one vector per text"))
            }
            _ => {
                if doc.tokens.is_empty() {
                    return Err(Error::NoRepresentableTokens(doc.id.clone()));
                }
                let vectors = provider.embed_texts(&doc.tokens)?;
                EmbeddingVector::new(mean_of(&vectors, provider.dim()))
            }
        },
    }
}

/// Per-document embedding results, in input order.
#[derive(Debug)]
pub struct BatchEmbeddings {
    pub results: Vec<Result<EmbeddingVector>>,
}

impl BatchEmbeddings {
    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    /// Successful embeddings with their input positions.
    pub fn vectors(&self) -> impl Iterator<Item = (usize, &EmbeddingVector)> {
        self.results
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().ok().map(|v| (i, v)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &Error)> {
        self.results
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e)))
    }
}

/// Embeds many documents. Local backends run in parallel; remote backends
/// send one request per `batch_size` documents with a bounded number of
/// requests in flight. Per-document failures are recorded; a request that
/// fails after all retries fails the whole call.
pub fn embed_batch(docs: &[CleanDocument], backend: &Backend, batch_size: usize) -> Result<BatchEmbeddings> {
    let results = match &backend.source {
        Source::Table(_) => docs.par_iter().map(|d| embed_document(d, backend)).collect(),
        Source::Remote(provider) => embed_remote(docs, backend.kind, provider, batch_size.max(1))?,
    };
    Ok(BatchEmbeddings { results })
}

fn embed_remote(
    docs: &[CleanDocument],
    kind: BackendKind,
    provider: &RemoteProvider,
    batch_size: usize,
) -> Result<Vec<Result<EmbeddingVector>>> {
    let chunks: Vec<&[CleanDocument]> = docs.chunks(batch_size).collect();
    let slots: Mutex<Vec<Option<Result<Vec<Result<EmbeddingVector>>>>>> =
        Mutex::new((0..chunks.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = provider.max_in_flight().min(chunks.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= chunks.len() {
                    break;
                }
                let out = embed_chunk(chunks[i], kind, provider);
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    let mut results = Vec::with_capacity(docs.len());
    for slot in slots.into_inner().unwrap() {
        results.extend(slot.expect("every chunk processed")?);
    }
    Ok(results)
}

fn embed_chunk(
    chunk: &[CleanDocument],
    kind: BackendKind,
    provider: &RemoteProvider,
) -> Result<Vec<Result<EmbeddingVector>>> {
    match kind {
        BackendKind::RemoteSentence => {
            let texts: Vec<String> = chunk.iter().map(|d| d.sentence_text.clone()).collect();
            let vectors = provider.embed_texts(&texts)?;
            Ok(vectors.into_iter().map(EmbeddingVector::new).collect())
        }
        _ => {
            let texts: Vec<String> = chunk.iter().flat_map(|d| d.tokens.iter().cloned()).collect();
            let vectors = if texts.is_empty() {
                Vec::new()
            } else {
                provider.embed_texts(&texts)?
            };
            let mut offset = 0;
            Ok(chunk
                .iter()
                .map(|d| {
                    let n = d.tokens.len();
                    let own = &vectors[offset..offset + n];
                    offset += n;
                    if n == 0 {
                        Err(Error::NoRepresentableTokens(d.id.clone()))
                    } else {
                        EmbeddingVector::new(mean_of(own, provider.dim()))
                    }
                })
                .collect())
        }
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    ab / (aa.sqrt() * bb.sqrt())
}
