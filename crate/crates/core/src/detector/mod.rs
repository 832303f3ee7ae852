//! Training and inference pipelines: clean → embed → density model →
//! thresholded drift verdict.

mod persist;

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::corpus::{clean, CleanDocument, Document};
use crate::density::{
    fit_centroid, fit_gmm, fit_vae, stack_embeddings, DensityModel, GmmConfig, ModelKind,
    SimilarityScore, VaeConfig,
};
use crate::embeddings::{
    embed_batch, embed_document, train_skipgram, Backend, BackendKind, EmbeddingVector,
    RemoteProvider, SkipGramConfig, WordVectorTable, PROVIDER_URL_ENV,
};
use crate::error::{Error, Result};

pub use persist::{load_pipeline, save_pipeline, FORMAT_VERSION, MANIFEST_FILE, TENSORS_FILE, VOCAB_FILE};

pub const DEFAULT_THRESHOLD: f64 = 0.995;
pub const DEFAULT_SEED: u64 = 42;

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_batch_size() -> usize {
    32
}

/// Where embeddings come from and how the backend is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    NativeSkipgram {
        #[serde(default)]
        skipgram: SkipGramConfig,
    },
    VectorFile {
        path: PathBuf,
    },
    RemoteSentence {
        endpoint: String,
        dim: usize,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
    },
    RemoteTokenAvg {
        endpoint: String,
        dim: usize,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
    },
}

impl BackendConfig {
    pub fn kind(&self) -> BackendKind {
        match self {
            BackendConfig::NativeSkipgram { .. } => BackendKind::NativeSkipgram,
            BackendConfig::VectorFile { .. } => BackendKind::VectorFile,
            BackendConfig::RemoteSentence { .. } => BackendKind::RemoteSentence,
            BackendConfig::RemoteTokenAvg { .. } => BackendKind::RemoteTokenAvg,
        }
    }

    pub fn batch_size(&self) -> usize {
        match self {
            BackendConfig::RemoteSentence { batch_size, .. } | BackendConfig::RemoteTokenAvg { batch_size, .. } => {
                *batch_size
            }
            _ => default_batch_size(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessingConfig {
    /// Stopword removal + stemming. Defaults to on for word-vector backends
    /// and off for remote backends.
    pub for_word_vectors: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub backend: BackendConfig,
    pub model_kind: ModelKind,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub preprocessing: PreprocessingConfig,
    #[serde(default)]
    pub gmm: GmmConfig,
    #[serde(default)]
    pub vae: VaeConfig,
    /// Seed for every stochastic step; overrides the seeds inside the
    /// component configs.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(backend: BackendConfig, model_kind: ModelKind) -> Self {
        PipelineConfig {
            backend,
            model_kind,
            threshold: DEFAULT_THRESHOLD,
            preprocessing: PreprocessingConfig::default(),
            gmm: GmmConfig::default(),
            vae: VaeConfig::default(),
            seed: DEFAULT_SEED,
        }
    }

    pub fn for_word_vectors(&self) -> bool {
        self.preprocessing
            .for_word_vectors
            .unwrap_or(!self.backend.kind().is_remote())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub n_documents: usize,
    /// Documents dropped because nothing survived cleaning or every token
    /// was out of vocabulary.
    pub n_dropped: usize,
    pub dim: usize,
    /// Unix seconds; honours `SOURCE_DATE_EPOCH` when set.
    pub created_at: u64,
    pub format_version: u32,
}

/// Why a verdict was forced to "drifted" without consulting the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictFlag {
    NoRepresentableTokens,
    EmptyAfterCleaning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftVerdict {
    pub doc_id: String,
    pub score: SimilarityScore,
    pub drifted: bool,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<VerdictFlag>,
}

/// Drifted iff `score < threshold`.
pub fn is_drifted(score: f64, threshold: f64) -> bool {
    score < threshold
}

impl DriftVerdict {
    pub fn new(doc_id: impl Into<String>, score: SimilarityScore, threshold: f64, flag: Option<VerdictFlag>) -> Self {
        DriftVerdict {
            doc_id: doc_id.into(),
            score,
            drifted: is_drifted(score.value(), threshold),
            threshold,
            flag,
        }
    }
}

/// Score of a cleaned document, or the reason it could not be scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanScore {
    pub score: SimilarityScore,
    pub flag: Option<VerdictFlag>,
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub config: PipelineConfig,
    pub backend: Backend,
    pub model: DensityModel,
    pub metadata: TrainingMetadata,
}

fn created_at() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

pub(crate) fn resolve_endpoint(configured: &str) -> String {
    match std::env::var(PROVIDER_URL_ENV) {
        Ok(url) if !url.trim().is_empty() => url.trim().to_owned(),
        _ => configured.to_owned(),
    }
}

/// Cleans every document, returning the survivors and the drop count.
fn clean_all(docs: &[Document], for_word_vectors: bool) -> Result<(Vec<CleanDocument>, usize)> {
    let mut cleaned = Vec::with_capacity(docs.len());
    let mut dropped = 0;
    for doc in docs {
        match clean(doc, for_word_vectors) {
            Ok(c) => cleaned.push(c),
            Err(Error::EmptyAfterCleaning(_)) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((cleaned, dropped))
}

fn build_backend(config: &PipelineConfig, cleaned: &[CleanDocument]) -> Result<Backend> {
    match &config.backend {
        BackendConfig::NativeSkipgram { skipgram } => {
            let cfg = SkipGramConfig {
                seed: config.seed,
                ..skipgram.clone()
            };
            Ok(Backend::native(train_skipgram(cleaned, &cfg)?))
        }
        BackendConfig::VectorFile { path } => Ok(Backend::vector_file(WordVectorTable::load(path)?)),
        BackendConfig::RemoteSentence { endpoint, dim, .. } | BackendConfig::RemoteTokenAvg { endpoint, dim, .. } => {
            let provider = RemoteProvider::new(resolve_endpoint(endpoint), *dim)?;
            Backend::remote(config.backend.kind(), provider)
        }
    }
}

/// Fits the configured density model on training embeddings.
pub fn fit_model(config: &PipelineConfig, embeddings: &[EmbeddingVector]) -> Result<DensityModel> {
    Ok(match config.model_kind {
        ModelKind::Centroid => DensityModel::Centroid(fit_centroid(embeddings)?),
        ModelKind::Gmm => {
            let cfg = GmmConfig {
                seed: config.seed,
                ..config.gmm.clone()
            };
            if embeddings.len() < cfg.k_max * 2 {
                return Err(Error::InsufficientData {
                    needed: cfg.k_max * 2,
                    found: embeddings.len(),
                });
            }
            DensityModel::Gmm(fit_gmm(stack_embeddings(embeddings)?.view(), &cfg)?)
        }
        ModelKind::Vae => {
            let cfg = VaeConfig {
                seed: config.seed,
                ..config.vae.clone()
            };
            DensityModel::Vae(fit_vae(stack_embeddings(embeddings)?.view(), &cfg)?)
        }
    })
}

/// Trains a pipeline, building the embedding backend from the config.
pub fn train_pipeline(docs: &[Document], config: &PipelineConfig) -> Result<TrainedPipeline> {
    config.validate()?;
    let (cleaned, dropped) = clean_all(docs, config.for_word_vectors())?;
    if cleaned.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let backend = build_backend(config, &cleaned)?;
    train_on_cleaned(cleaned, dropped, config, backend)
}

/// Trains a pipeline on top of an already built backend.
pub fn train_pipeline_with_backend(
    docs: &[Document],
    config: &PipelineConfig,
    backend: Backend,
) -> Result<TrainedPipeline> {
    config.validate()?;
    let (cleaned, dropped) = clean_all(docs, config.for_word_vectors())?;
    if cleaned.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    train_on_cleaned(cleaned, dropped, config, backend)
}

fn train_on_cleaned(
    cleaned: Vec<CleanDocument>,
    mut dropped: usize,
    config: &PipelineConfig,
    backend: Backend,
) -> Result<TrainedPipeline> {
    let batch = embed_batch(&cleaned, &backend, config.backend.batch_size())?;
    let mut embeddings = Vec::with_capacity(batch.len());
    for result in batch.results {
        match result {
            Ok(e) => embeddings.push(e),
            Err(Error::NoRepresentableTokens(_)) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if embeddings.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if dropped > 0 {
        log::info!("{dropped} training document(s) dropped during cleaning/embedding");
    }
    let model = fit_model(config, &embeddings)?;
    Ok(TrainedPipeline {
        metadata: TrainingMetadata {
            n_documents: embeddings.len(),
            n_dropped: dropped,
            dim: backend.dim(),
            created_at: created_at(),
            format_version: FORMAT_VERSION,
        },
        config: config.clone(),
        backend,
        model,
    })
}

impl TrainedPipeline {
    pub fn threshold(&self) -> f64 {
        self.config.threshold
    }

    /// Cleans a payload document with the pipeline's preprocessing.
    pub fn prepare(&self, doc: &Document) -> Result<CleanDocument> {
        clean(doc, self.config.for_word_vectors())
    }

    /// Scores an already cleaned document. Unrepresentable documents score
    /// 0 with a flag instead of failing.
    pub fn score_clean(&self, doc: &CleanDocument) -> Result<CleanScore> {
        if doc.is_empty() {
            return Ok(flagged(VerdictFlag::EmptyAfterCleaning));
        }
        match embed_document(doc, &self.backend) {
            Ok(e) => Ok(CleanScore {
                score: self.model.score(&e)?,
                flag: None,
            }),
            Err(Error::NoRepresentableTokens(_)) => Ok(flagged(VerdictFlag::NoRepresentableTokens)),
            Err(e) => Err(e),
        }
    }

    /// Batched [`Self::score_clean`]; remote backends embed in batches.
    pub fn score_clean_batch(&self, docs: &[CleanDocument]) -> Result<Vec<CleanScore>> {
        let nonempty: Vec<CleanDocument> = docs.iter().filter(|d| !d.is_empty()).cloned().collect();
        let batch = embed_batch(&nonempty, &self.backend, self.config.backend.batch_size())?;
        let mut results = batch.results.into_iter();
        docs.iter()
            .map(|d| {
                if d.is_empty() {
                    return Ok(flagged(VerdictFlag::EmptyAfterCleaning));
                }
                match results.next().expect("one result per non-empty document") {
                    Ok(e) => Ok(CleanScore {
                        score: self.model.score(&e)?,
                        flag: None,
                    }),
                    Err(Error::NoRepresentableTokens(_)) => Ok(flagged(VerdictFlag::NoRepresentableTokens)),
                    Err(e) => Err(e),
                }
            })
            .collect()
    }

    pub fn verdict(&self, doc_id: &str, scored: CleanScore) -> DriftVerdict {
        DriftVerdict::new(doc_id, scored.score, self.threshold(), scored.flag)
    }

    /// Scores a batch of payload documents, preserving order.
    pub fn score_payloads(&self, docs: &[Document]) -> Result<Vec<DriftVerdict>> {
        let cleaned: Vec<CleanDocument> = docs
            .iter()
            .map(|d| match self.prepare(d) {
                Ok(c) => Ok(c),
                Err(Error::EmptyAfterCleaning(_)) => Ok(CleanDocument::from_tokens::<&str>(d.id.clone(), &[])),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        let scores = self.score_clean_batch(&cleaned)?;
        Ok(docs
            .iter()
            .zip(scores)
            .map(|(d, s)| self.verdict(&d.id, s))
            .collect())
    }
}

fn flagged(flag: VerdictFlag) -> CleanScore {
    CleanScore {
        score: SimilarityScore::new(0.0),
        flag: Some(flag),
    }
}

/// Scores one payload document against a trained pipeline.
pub fn score_payload(pipe: &TrainedPipeline, doc: &Document) -> Result<DriftVerdict> {
    let scored = match pipe.prepare(doc) {
        Ok(clean) => pipe.score_clean(&clean)?,
        Err(Error::EmptyAfterCleaning(_)) => flagged(VerdictFlag::EmptyAfterCleaning),
        Err(e) => return Err(e),
    };
    Ok(pipe.verdict(&doc.id, scored))
}
