use super::{check_dim, snap, SimilarityScore};
use crate::embeddings::{cosine, EmbeddingVector};
use crate::error::{Error, Result};

/// Cosine-to-centroid baseline: no density, just the direction of the mean
/// training embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidModel {
    centroid: EmbeddingVector,
}

impl CentroidModel {
    pub fn from_centroid(centroid: EmbeddingVector) -> Self {
        CentroidModel { centroid }
    }

    pub fn centroid(&self) -> &EmbeddingVector {
        &self.centroid
    }

    pub fn dim(&self) -> usize {
        self.centroid.dim()
    }
}

pub fn fit_centroid(embeddings: &[EmbeddingVector]) -> Result<CentroidModel> {
    let first = embeddings.first().ok_or(Error::EmptyCorpus)?;
    let mut sum = vec![0f64; first.dim()];
    for e in embeddings {
        check_dim(first.dim(), e)?;
        for (s, v) in sum.iter_mut().zip(e.values()) {
            *s += v;
        }
    }
    let n = embeddings.len() as f64;
    let mean = sum.into_iter().map(|s| snap(s / n)).collect();
    Ok(CentroidModel {
        centroid: EmbeddingVector::new(mean)?,
    })
}

pub fn score_centroid(model: &CentroidModel, e: &EmbeddingVector) -> Result<SimilarityScore> {
    check_dim(model.dim(), e)?;
    Ok(SimilarityScore::new(cosine(e.values(), model.centroid.values())))
}
