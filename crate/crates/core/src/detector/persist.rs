//! Model directory layout:
//!
//! ```text
//! manifest.json   config, metadata, tensor index, per-file SHA-256
//! tensors.bin     little-endian f32 arrays, row-major, in manifest order
//! vocab.txt       one word per line (word-vector backends only)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{resolve_endpoint, PipelineConfig, TrainedPipeline, TrainingMetadata};
use crate::density::{
    CentroidModel, DensityModel, GmmModel, ScoreScale, VaeModel, VaeParams, VAE_TENSOR_NAMES,
};
use crate::embeddings::{Backend, BackendDescriptor, BackendKind, EmbeddingVector, RemoteProvider, WordVectorTable};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TENSORS_FILE: &str = "tensors.bin";
pub const VOCAB_FILE: &str = "vocab.txt";

const WORD_VECTORS: &str = "word_vectors";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    config: PipelineConfig,
    metadata: TrainingMetadata,
    backend: BackendDescriptor,
    model: ModelManifest,
    tensors: Vec<TensorEntry>,
    /// File name → lowercase hex SHA-256.
    files: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelManifest {
    Gmm {
        n_components: usize,
        dim: usize,
        scale: ScoreScale,
        silhouettes: Vec<(usize, Option<f64>)>,
    },
    Vae {
        dim: usize,
        hidden: usize,
        latent: usize,
    },
    Centroid {
        dim: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset in f32 elements from the start of tensors.bin.
    offset: usize,
}

impl TensorEntry {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Default)]
struct TensorWriter {
    bytes: Vec<u8>,
    entries: Vec<TensorEntry>,
}

impl TensorWriter {
    fn push<I: IntoIterator<Item = f32>>(&mut self, name: &str, shape: Vec<usize>, values: I) {
        let offset = self.bytes.len() / 4;
        let mut count = 0;
        for v in values {
            self.bytes.extend_from_slice(&v.to_le_bytes());
            count += 1;
        }
        debug_assert_eq!(count, shape.iter().product::<usize>());
        self.entries.push(TensorEntry {
            name: name.to_owned(),
            shape,
            offset,
        });
    }

    fn push_f64(&mut self, name: &str, shape: Vec<usize>, values: &[f64]) {
        self.push(name, shape, values.iter().map(|&v| v as f32));
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes a pipeline into `dir`, creating it if needed.
pub fn save_pipeline(pipe: &TrainedPipeline, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut tensors = TensorWriter::default();
    let mut vocab = None;
    if let Some(table) = pipe.backend.table() {
        tensors.push(
            WORD_VECTORS,
            vec![table.len(), table.dim()],
            table.matrix().iter().copied(),
        );
        let mut text = String::new();
        for w in table.words() {
            text.push_str(w);
            text.push('\n');
        }
        vocab = Some(text);
    }

    let model = match &pipe.model {
        DensityModel::Gmm(m) => {
            let (k, d) = (m.n_components(), m.dim());
            tensors.push_f64("gmm.weights", vec![k], m.stored_weights());
            tensors.push_f64("gmm.means", vec![k, d], m.means().as_slice().expect("standard layout"));
            tensors.push_f64("gmm.variances", vec![k, d], m.variances().as_slice().expect("standard layout"));
            ModelManifest::Gmm {
                n_components: k,
                dim: d,
                scale: m.scale(),
                silhouettes: m.silhouettes.clone(),
            }
        }
        DensityModel::Vae(m) => {
            let p = m.params();
            for ((name, shape), values) in VAE_TENSOR_NAMES.iter().zip(p.shapes()).zip(p.slices()) {
                tensors.push_f64(&format!("vae.{name}"), shape, values);
            }
            ModelManifest::Vae {
                dim: m.dim(),
                hidden: m.hidden(),
                latent: m.latent(),
            }
        }
        DensityModel::Centroid(m) => {
            tensors.push_f64("centroid", vec![m.dim()], m.centroid().values());
            ModelManifest::Centroid { dim: m.dim() }
        }
    };

    let mut files = BTreeMap::new();
    write_file(&dir.join(TENSORS_FILE), &tensors.bytes)?;
    files.insert(TENSORS_FILE.to_owned(), sha256_hex(&tensors.bytes));
    if let Some(text) = vocab {
        write_file(&dir.join(VOCAB_FILE), text.as_bytes())?;
        files.insert(VOCAB_FILE.to_owned(), sha256_hex(text.as_bytes()));
    } else {
        // a stale vocab from an earlier save would be misleading
        let _ = fs::remove_file(dir.join(VOCAB_FILE));
    }

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config: pipe.config.clone(),
        metadata: pipe.metadata.clone(),
        backend: pipe.backend.descriptor(),
        model,
        tensors: tensors.entries,
        files,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

struct TensorReader<'a> {
    bytes: &'a [u8],
    entries: BTreeMap<&'a str, &'a TensorEntry>,
}

impl TensorReader<'_> {
    fn get(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        Ok(self.get_f32(name, shape)?.into_iter().map(f64::from).collect())
    }

    fn get_f32(&self, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("tensor {name:?} missing from manifest")))?;
        if entry.shape != shape {
            return Err(Error::InvalidArgument(format!(
                "tensor {name:?} has shape {:?}, expected {shape:?}",
                entry.shape
            )));
        }
        let start = entry.offset * 4;
        let end = start + entry.len() * 4;
        let raw = self
            .bytes
            .get(start..end)
            .ok_or_else(|| Error::InvalidArgument(format!("tensor {name:?} extends past end of {TENSORS_FILE}")))?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Loads a pipeline saved by [`save_pipeline`], verifying checksums.
/// Remote endpoints honour the provider URL environment override.
pub fn load_pipeline(dir: impl AsRef<Path>) -> Result<TrainedPipeline> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let raw = read_file(&manifest_path)?;
    let value: serde_json::Value =
        serde_json::from_slice(&raw).map_err(|e| Error::format(e.line(), format!("{MANIFEST_FILE}: {e}")))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::format(0, format!("{MANIFEST_FILE}: missing format_version")))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::VersionUnsupported(version.min(u64::from(u32::MAX)) as u32));
    }
    let manifest: Manifest =
        serde_json::from_value(value).map_err(|e| Error::format(0, format!("{MANIFEST_FILE}: {e}")))?;

    let mut contents = BTreeMap::new();
    for (name, expected) in &manifest.files {
        let bytes = read_file(&dir.join(name))?;
        if sha256_hex(&bytes) != *expected {
            return Err(Error::ChecksumMismatch { file: name.clone() });
        }
        contents.insert(name.as_str(), bytes);
    }
    let tensor_bytes = contents
        .get(TENSORS_FILE)
        .ok_or_else(|| Error::MissingFile(dir.join(TENSORS_FILE)))?;
    let reader = TensorReader {
        bytes: tensor_bytes,
        entries: manifest.tensors.iter().map(|t| (t.name.as_str(), t)).collect(),
    };

    let desc = &manifest.backend;
    let backend = match desc.kind {
        BackendKind::NativeSkipgram | BackendKind::VectorFile => {
            let vocab = contents
                .get(VOCAB_FILE)
                .ok_or_else(|| Error::MissingFile(dir.join(VOCAB_FILE)))?;
            let vocab = std::str::from_utf8(vocab)
                .map_err(|e| Error::format(0, format!("{VOCAB_FILE}: {e}")))?;
            let words: Vec<String> = vocab.lines().map(str::to_owned).collect();
            let matrix = reader.get_f32(WORD_VECTORS, &[words.len(), desc.dim])?;
            let table = WordVectorTable::from_parts(words, desc.dim, matrix)?;
            if desc.kind == BackendKind::NativeSkipgram {
                Backend::native(table)
            } else {
                Backend::vector_file(table)
            }
        }
        BackendKind::RemoteSentence | BackendKind::RemoteTokenAvg => {
            let endpoint = desc
                .endpoint
                .as_deref()
                .ok_or_else(|| Error::format(0, format!("{MANIFEST_FILE}: remote backend without endpoint")))?;
            Backend::remote(desc.kind, RemoteProvider::new(resolve_endpoint(endpoint), desc.dim)?)?
        }
    };

    let model = match &manifest.model {
        ModelManifest::Gmm {
            n_components: k,
            dim: d,
            scale,
            silhouettes,
        } => {
            let weights = reader.get("gmm.weights", &[*k])?;
            let means = Array2::from_shape_vec((*k, *d), reader.get("gmm.means", &[*k, *d])?).expect("shape checked");
            let vars =
                Array2::from_shape_vec((*k, *d), reader.get("gmm.variances", &[*k, *d])?).expect("shape checked");
            let mut m = GmmModel::from_parts(weights, means, vars, *scale)?;
            m.silhouettes = silhouettes.clone();
            DensityModel::Gmm(m)
        }
        ModelManifest::Vae { dim, hidden, latent } => {
            let shapes = VaeParams::zeros(*dim, *hidden, *latent).shapes();
            let tensors = VAE_TENSOR_NAMES
                .iter()
                .zip(shapes)
                .map(|(name, shape)| reader.get(&format!("vae.{name}"), &shape))
                .collect::<Result<Vec<_>>>()?;
            DensityModel::Vae(VaeModel::from_params(VaeParams::from_tensors(
                *dim, *hidden, *latent, &tensors,
            )?)?)
        }
        ModelManifest::Centroid { dim } => {
            let c = reader.get("centroid", &[*dim])?;
            DensityModel::Centroid(CentroidModel::from_centroid(EmbeddingVector::new(c)?))
        }
    };
    if model.dim() != backend.dim() {
        return Err(Error::DimensionMismatch {
            expected: backend.dim(),
            found: model.dim(),
        });
    }

    Ok(TrainedPipeline {
        config: manifest.config,
        backend,
        model,
        metadata: manifest.metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::density::{GmmConfig, ModelKind, VaeConfig};
    use crate::detector::{score_payload, train_pipeline_with_backend, BackendConfig};

    fn table() -> WordVectorTable {
        let words = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];
        let mut m = Vec::new();
        for (i, _) in words.iter().enumerate() {
            for j in 0..3 {
                m.push(((i * 7 + j * 3) % 11) as f32 / 11.0 - 0.3);
            }
        }
        WordVectorTable::from_parts(words.iter().map(|s| s.to_string()).collect(), 3, m).unwrap()
    }

    fn docs() -> Vec<Document> {
        let words = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];
        (0..24)
            .map(|i| {
                let text = format!("{} {} {}", words[i % 6], words[(i * 5 + 1) % 6], words[(i / 3) % 6]);
                Document::new(format!("d{i}"), text)
            })
            .collect()
    }

    fn config(kind: ModelKind) -> PipelineConfig {
        let mut c = PipelineConfig::new(BackendConfig::VectorFile { path: "v.txt".into() }, kind);
        c.gmm = GmmConfig {
            k_min: 2,
            k_max: 3,
            ..GmmConfig::default()
        };
        c.vae = VaeConfig {
            hidden: 8,
            latent: 2,
            epochs: 3,
            batch: 8,
            ..VaeConfig::default()
        };
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for kind in [ModelKind::Centroid, ModelKind::Gmm, ModelKind::Vae] {
            let pipe = train_pipeline_with_backend(&docs(), &config(kind), Backend::vector_file(table())).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_pipeline(&pipe, dir.path()).unwrap();
            let loaded = load_pipeline(dir.path()).unwrap();
            assert_eq!(loaded.model, pipe.model, "{kind:?}");
            for d in docs().iter().chain([&Document::new("p", "omega beta beta")]) {
                let a = score_payload(&pipe, d).unwrap().score.value();
                let b = score_payload(&loaded, d).unwrap().score.value();
                assert_eq!(a.to_bits(), b.to_bits(), "{kind:?} {}", d.id);
            }
        }
    }

    #[test]
    fn corruption_and_version_errors() {
        let pipe =
            train_pipeline_with_backend(&docs(), &config(ModelKind::Centroid), Backend::vector_file(table())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_pipeline(&pipe, dir.path()).unwrap();

        let tensors = dir.path().join(TENSORS_FILE);
        let mut bytes = fs::read(&tensors).unwrap();
        bytes[0] ^= 0xff;
        fs::write(&tensors, &bytes).unwrap();
        assert_eq!(load_pipeline(dir.path()).unwrap_err().kind(), "ChecksumMismatch");

        save_pipeline(&pipe, dir.path()).unwrap();
        let manifest = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest).unwrap();
        fs::write(&manifest, text.replace("\"format_version\": 1", "\"format_version\": 99")).unwrap();
        assert!(matches!(load_pipeline(dir.path()), Err(Error::VersionUnsupported(99))));

        save_pipeline(&pipe, dir.path()).unwrap();
        fs::remove_file(dir.path().join(VOCAB_FILE)).unwrap();
        assert_eq!(load_pipeline(dir.path()).unwrap_err().kind(), "MissingFile");
        assert_eq!(
            load_pipeline(dir.path().join("nope")).unwrap_err().kind(),
            "MissingFile"
        );
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            let pipe =
                train_pipeline_with_backend(&docs(), &config(ModelKind::Gmm), Backend::vector_file(table())).unwrap();
            save_pipeline(&pipe, dir.path()).unwrap();
        }
        for f in [MANIFEST_FILE, TENSORS_FILE, VOCAB_FILE] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
}
