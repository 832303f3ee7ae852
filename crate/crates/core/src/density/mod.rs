//! Density models over document embeddings, each turning "how well does
//! this embedding fit the training distribution" into a similarity score in
//! `[0, 1]`.

mod centroid;
mod gmm;
mod silhouette;
mod vae;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingVector;
use crate::error::{Error, Result};

pub use centroid::{fit_centroid, score_centroid, CentroidModel};
pub use gmm::{
    diagonal_log_density, fit_em, fit_gmm, score_gmm, EmFit, GmmConfig, GmmModel, ScoreScale,
    VARIANCE_FLOOR,
};
pub use silhouette::silhouette_score;
pub use vae::{
    fit_vae, fit_vae_with_report, kl_divergence, score_vae, VaeConfig, VaeGradients, VaeModel, VaeParams,
    VaeTrainingReport, VAE_TENSOR_NAMES,
};

/// A similarity score, always within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            SimilarityScore(0.0)
        } else {
            SimilarityScore(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gmm,
    Vae,
    Centroid,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gmm => "gmm",
            ModelKind::Vae => "vae",
            ModelKind::Centroid => "centroid",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gmm" => Ok(ModelKind::Gmm),
            "vae" => Ok(ModelKind::Vae),
            "centroid" => Ok(ModelKind::Centroid),
            other => Err(Error::InvalidArgument(format!("unknown model kind {other:?}"))),
        }
    }
}

/// A fitted density model of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Gmm(GmmModel),
    Vae(VaeModel),
    Centroid(CentroidModel),
}

impl DensityModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            DensityModel::Gmm(_) => ModelKind::Gmm,
            DensityModel::Vae(_) => ModelKind::Vae,
            DensityModel::Centroid(_) => ModelKind::Centroid,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Gmm(m) => m.dim(),
            DensityModel::Vae(m) => m.dim(),
            DensityModel::Centroid(m) => m.dim(),
        }
    }

    pub fn score(&self, e: &EmbeddingVector) -> Result<SimilarityScore> {
        match self {
            DensityModel::Gmm(m) => score_gmm(m, e),
            DensityModel::Vae(m) => score_vae(m, e),
            DensityModel::Centroid(m) => score_centroid(m, e),
        }
    }
}

/// Stacks embeddings into an `N × D` matrix.
pub fn stack_embeddings(embeddings: &[EmbeddingVector]) -> Result<Array2<f64>> {
    let first = embeddings.first().ok_or(Error::EmptyCorpus)?;
    let dim = first.dim();
    let mut flat = Vec::with_capacity(embeddings.len() * dim);
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.dim(),
            });
        }
        flat.extend_from_slice(e.values());
    }
    Ok(Array2::from_shape_vec((embeddings.len(), dim), flat).expect("shape checked"))
}

/// Rounds to the nearest `f32` so parameters survive a float32 round trip.
pub(crate) fn snap(x: f64) -> f64 {
    x as f32 as f64
}

pub(crate) fn check_dim(expected: usize, e: &EmbeddingVector) -> Result<()> {
    if e.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: e.dim(),
        });
    }
    Ok(())
}
