use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use driftdet::corpus::{load_corpus, CorpusFormat, Document};
use driftdet::density::ModelKind;
use driftdet::detector::{BackendConfig, PipelineConfig};
use driftdet::embeddings::SkipGramConfig;
use driftdet::syntax_stats::CompareOptions;

/// Run configuration file (TOML, or JSON when the extension is `.json`).
/// Command-line flags win over values read from here.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Option<PipelineConfig>,
    /// Training corpus; the in-distribution corpus for `eval`.
    pub corpus: Option<CorpusSpec>,
    /// Payload for `score`/`explain`; the out-of-distribution corpus for
    /// `eval`.
    pub payload: Option<CorpusSpec>,
    pub model_dir: Option<PathBuf>,
    pub stats: StatsConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub text_column: Option<String>,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub id_column: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub chunker: Option<PathBuf>,
    pub new_pattern_threshold: f64,
    pub rule_train_max: f64,
    pub rule_payload_min: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        let d = CompareOptions::default();
        StatsConfig {
            chunker: None,
            new_pattern_threshold: d.new_pattern_threshold,
            rule_train_max: d.rule_train_max,
            rule_payload_min: d.rule_payload_min,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub thresholds: Option<Vec<f64>>,
    pub split_fraction: f64,
    pub pair: Option<String>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            thresholds: None,
            split_fraction: driftdet::eval::DEFAULT_SPLIT_FRACTION,
            pair: None,
            csv: None,
            json: None,
        }
    }
}

pub fn load_run_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| driftdet::Error::io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| anyhow!(ConfigError(format!("{}: {e}", path.display()))))?
    } else {
        toml::from_str(&text).map_err(|e| anyhow!(ConfigError(format!("{}: {e}", path.display()))))?
    };
    Ok(parsed)
}

/// A malformed or incomplete run configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    NativeSkipgram,
    VectorFile,
    RemoteSentence,
    RemoteTokenAvg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Gmm,
    Vae,
    Centroid,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Gmm => ModelKind::Gmm,
            ModelArg::Vae => ModelKind::Vae,
            ModelArg::Centroid => ModelKind::Centroid,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct PipelineFlags {
    /// Embedding backend [default: native-skipgram]
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Word-vector file for the vector-file backend
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Provider URL for remote backends
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Embedding dimension (skip-gram size or provider width)
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Similarity below this is drift [default: 0.995]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
}

fn backend_from_flags(kind: BackendArg, base: Option<&BackendConfig>, f: &PipelineFlags) -> Result<BackendConfig> {
    let config_endpoint = match base {
        Some(BackendConfig::RemoteSentence { endpoint, dim, .. } | BackendConfig::RemoteTokenAvg { endpoint, dim, .. }) => {
            Some((endpoint.clone(), *dim))
        }
        _ => None,
    };
    let remote = |f: &PipelineFlags| -> Result<(String, usize)> {
        let endpoint = f
            .endpoint
            .clone()
            .or_else(|| config_endpoint.as_ref().map(|c| c.0.clone()))
            .ok_or_else(|| anyhow!(ConfigError("remote backends need --endpoint".into())))?;
        let dim = f
            .dim
            .or(config_endpoint.as_ref().map(|c| c.1))
            .ok_or_else(|| anyhow!(ConfigError("remote backends need --dim".into())))?;
        Ok((endpoint, dim))
    };
    Ok(match kind {
        BackendArg::NativeSkipgram => {
            let mut skipgram = match base {
                Some(BackendConfig::NativeSkipgram { skipgram }) => skipgram.clone(),
                _ => SkipGramConfig::default(),
            };
            if let Some(d) = f.dim {
                skipgram.dim = d;
            }
            BackendConfig::NativeSkipgram { skipgram }
        }
        BackendArg::VectorFile => {
            let path = match (&f.vectors, base) {
                (Some(p), _) => p.clone(),
                (None, Some(BackendConfig::VectorFile { path })) => path.clone(),
                _ => bail!(ConfigError("the vector-file backend needs --vectors".into())),
            };
            BackendConfig::VectorFile { path }
        }
        BackendArg::RemoteSentence => {
            let (endpoint, dim) = remote(f)?;
            BackendConfig::RemoteSentence {
                endpoint,
                dim,
                batch_size: base.map_or(32, BackendConfig::batch_size),
            }
        }
        BackendArg::RemoteTokenAvg => {
            let (endpoint, dim) = remote(f)?;
            BackendConfig::RemoteTokenAvg {
                endpoint,
                dim,
                batch_size: base.map_or(32, BackendConfig::batch_size),
            }
        }
    })
}

fn kind_of(b: &BackendConfig) -> BackendArg {
    match b {
        BackendConfig::NativeSkipgram { .. } => BackendArg::NativeSkipgram,
        BackendConfig::VectorFile { .. } => BackendArg::VectorFile,
        BackendConfig::RemoteSentence { .. } => BackendArg::RemoteSentence,
        BackendConfig::RemoteTokenAvg { .. } => BackendArg::RemoteTokenAvg,
    }
}

/// Merges flags over the configured pipeline.
pub fn resolve_pipeline(config: Option<PipelineConfig>, f: &PipelineFlags) -> Result<PipelineConfig> {
    let model_kind = f
        .model
        .map(ModelKind::from)
        .or(config.as_ref().map(|c| c.model_kind))
        .ok_or_else(|| anyhow!(ConfigError("no model kind: pass --model or set pipeline.model_kind".into())))?;
    let base_backend = config.as_ref().map(|c| &c.backend);
    let kind = f
        .backend
        .or(base_backend.map(kind_of))
        .unwrap_or(BackendArg::NativeSkipgram);
    let same_kind = base_backend.filter(|b| kind_of(b) == kind);
    let backend = backend_from_flags(kind, same_kind, f)?;

    let mut resolved = match config {
        Some(mut c) => {
            c.backend = backend;
            c.model_kind = model_kind;
            c
        }
        None => PipelineConfig::new(backend, model_kind),
    };
    if let Some(t) = f.threshold {
        resolved.threshold = t;
    }
    if let Some(s) = f.seed {
        resolved.seed = s;
    }
    resolved.validate()?;
    Ok(resolved)
}

#[derive(Debug, Clone, Default, Args)]
pub struct CorpusFlags {
    /// CSV column holding the text; implies CSV input
    #[arg(long)]
    pub text_column: Option<String>,
    /// CSV column holding the class label
    #[arg(long)]
    pub label_column: Option<String>,
    /// CSV column holding document ids
    #[arg(long)]
    pub id_column: Option<String>,
}

/// Corpus spec from a path flag merged over the config entry.
pub fn resolve_corpus(path: Option<PathBuf>, flags: &CorpusFlags, config: Option<&CorpusSpec>, what: &str) -> Result<CorpusSpec> {
    let base = config.cloned();
    let path = path
        .or(base.as_ref().map(|c| c.path.clone()))
        .ok_or_else(|| anyhow!(ConfigError(format!("no {what} corpus given"))))?;
    let pick = |flag: &Option<String>, cfg: Option<&String>| flag.clone().or(cfg.cloned());
    Ok(CorpusSpec {
        path,
        text_column: pick(&flags.text_column, base.as_ref().and_then(|c| c.text_column.as_ref())),
        label_column: pick(&flags.label_column, base.as_ref().and_then(|c| c.label_column.as_ref())),
        id_column: pick(&flags.id_column, base.as_ref().and_then(|c| c.id_column.as_ref())),
    })
}

impl CorpusSpec {
    pub fn format(&self) -> CorpusFormat {
        let is_csv = self.path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        match (&self.text_column, is_csv) {
            (Some(text), _) => CorpusFormat::Csv {
                text_column: text.clone(),
                label_column: self.label_column.clone(),
                id_column: self.id_column.clone(),
            },
            (None, true) => CorpusFormat::Csv {
                text_column: "text".into(),
                label_column: self.label_column.clone(),
                id_column: self.id_column.clone(),
            },
            (None, false) => CorpusFormat::PlainLines,
        }
    }

    pub fn load(&self) -> Result<Vec<Document>> {
        load_corpus(&self.path, &self.format()).with_context(|| format!("loading {}", self.path.display()))
    }
}
