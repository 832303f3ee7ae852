//! Diagonal-covariance Gaussian mixture fitted by EM, with the component
//! count chosen by silhouette score.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::silhouette::{pairwise_distances, silhouette_from_distances};
use super::{check_dim, snap, SimilarityScore};
use crate::embeddings::EmbeddingVector;
use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub max_iter: usize,
    /// Stop once the mean per-sample log-likelihood improves by less.
    pub tol: f64,
    pub silhouette_sample: usize,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            k_min: 2,
            k_max: 8,
            max_iter: 200,
            tol: 1e-4,
            silhouette_sample: 2000,
            seed: 42,
        }
    }
}

/// Min-max bounds of the dimension-normalized training log-likelihoods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreScale {
    pub train_min: f64,
    pub train_max: f64,
}

impl ScoreScale {
    pub fn from_scores(scores: &[f64]) -> Self {
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min < max {
            ScoreScale {
                train_min: min,
                train_max: max,
            }
        } else {
            // every training point scored the same; that value maps to 1
            ScoreScale {
                train_min: max - 1.0,
                train_max: max,
            }
        }
    }

    pub fn apply(&self, raw: f64) -> SimilarityScore {
        SimilarityScore::new((raw - self.train_min) / (self.train_max - self.train_min))
    }
}

/// Log density of `x` under a diagonal Gaussian.
pub fn diagonal_log_density(x: ArrayView1<f64>, mean: ArrayView1<f64>, var: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for ((&xi, &m), &v) in x.iter().zip(mean).zip(var) {
        let d = xi - m;
        acc += LN_2PI + v.ln() + d * d / v;
    }
    -0.5 * acc
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn mixture_log_density(
    log_weights: &[f64],
    means: &Array2<f64>,
    variances: &Array2<f64>,
    x: ArrayView1<f64>,
    scratch: &mut Vec<f64>,
) -> f64 {
    scratch.clear();
    for (k, lw) in log_weights.iter().enumerate() {
        scratch.push(lw + diagonal_log_density(x, means.row(k), variances.row(k)));
    }
    log_sum_exp(scratch)
}

/// Raw result of one EM run.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub weights: Vec<f64>,
    pub means: Array2<f64>,
    pub variances: Array2<f64>,
    /// Mean per-sample log-likelihood at every E-step, in order.
    pub log_likelihoods: Vec<f64>,
    /// Hard assignment of each training row to its most responsible component.
    pub labels: Vec<usize>,
    pub converged: bool,
}

impl EmFit {
    pub fn log_density(&self, x: ArrayView1<f64>) -> f64 {
        let lw: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        mixture_log_density(&lw, &self.means, &self.variances, x, &mut Vec::new())
    }
}

fn kmeans_pp_seeds(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut centers = Array2::zeros((k, data.ncols()));
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&data.row(first));
    let mut nearest: Vec<f64> = data
        .outer_iter()
        .map(|r| sq_dist(r, centers.row(0)))
        .collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            // all remaining points coincide with a center
            Err(_) => rng.gen_range(0..n),
        };
        centers.row_mut(c).assign(&data.row(pick));
        for (i, r) in data.outer_iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(r, centers.row(c)));
        }
    }
    centers
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn e_step(
    data: ArrayView2<f64>,
    weights: &[f64],
    means: &Array2<f64>,
    variances: &Array2<f64>,
) -> (Array2<f64>, f64) {
    let k = weights.len();
    let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let rows: Vec<(Vec<f64>, f64)> = (0..data.nrows())
        .into_par_iter()
        .map_init(Vec::new, |scratch: &mut Vec<f64>, i| {
            let x = data.row(i);
            let lse = mixture_log_density(&log_weights, means, variances, x, scratch);
            let resp = scratch.iter().map(|lp| (lp - lse).exp()).collect();
            (resp, lse)
        })
        .collect();
    let mut resp = Array2::zeros((data.nrows(), k));
    let mut total = 0.0;
    for (i, (r, lse)) in rows.into_iter().enumerate() {
        resp.row_mut(i).assign(&Array1::from(r));
        total += lse;
    }
    (resp, total / data.nrows() as f64)
}

fn m_step(
    data: ArrayView2<f64>,
    resp: &Array2<f64>,
    weights: &mut [f64],
    means: &mut Array2<f64>,
    variances: &mut Array2<f64>,
) {
    let n = data.nrows() as f64;
    for k in 0..weights.len() {
        let r = resp.column(k);
        let nk: f64 = r.sum();
        weights[k] = nk / n;
        if nk <= 0.0 {
            continue;
        }
        let mut mean = Array1::<f64>::zeros(data.ncols());
        for (x, &rik) in data.outer_iter().zip(r) {
            mean.scaled_add(rik, &x);
        }
        mean /= nk;
        let mut var = Array1::<f64>::zeros(data.ncols());
        for (x, &rik) in data.outer_iter().zip(r) {
            for ((v, &xi), &m) in var.iter_mut().zip(x).zip(&mean) {
                *v += rik * (xi - m) * (xi - m);
            }
        }
        var.mapv_inplace(|v| (v / nk).max(VARIANCE_FLOOR));
        means.row_mut(k).assign(&mean);
        variances.row_mut(k).assign(&var);
    }
}

/// Runs EM for a fixed component count.
pub fn fit_em(data: ArrayView2<f64>, k: usize, max_iter: usize, tol: f64, seed: u64) -> Result<EmFit> {
    let (n, d) = data.dim();
    if k == 0 || d == 0 {
        return Err(Error::InvalidArgument("component count and dimension must be positive".into()));
    }
    if n < k {
        return Err(Error::InsufficientData { needed: k, found: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = kmeans_pp_seeds(data, k, &mut rng);
    let global_var = data
        .var_axis(Axis(0), 0.0)
        .mapv(|v| v.max(VARIANCE_FLOOR));
    let mut variances = Array2::zeros((k, d));
    for mut row in variances.outer_iter_mut() {
        row.assign(&global_var);
    }
    let mut weights = vec![1.0 / k as f64; k];

    let mut log_likelihoods = Vec::new();
    let mut converged = false;
    let mut resp;
    loop {
        let (r, ll) = e_step(data, &weights, &means, &variances);
        resp = r;
        let improvement = log_likelihoods.last().map(|prev| ll - prev);
        log_likelihoods.push(ll);
        if improvement.is_some_and(|imp| imp < tol) {
            converged = true;
            break;
        }
        if log_likelihoods.len() > max_iter {
            break;
        }
        m_step(data, &resp, &mut weights, &mut means, &mut variances);
    }
    let labels = resp
        .outer_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
                .0
        })
        .collect();
    Ok(EmFit {
        weights,
        means,
        variances,
        log_likelihoods,
        labels,
        converged,
    })
}

/// A fitted mixture. Parameters are stored at `f32` precision.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    raw_weights: Vec<f64>,
    log_weights: Vec<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
    scale: ScoreScale,
    /// Silhouette of every candidate component count (None when undefined).
    pub silhouettes: Vec<(usize, Option<f64>)>,
}

impl GmmModel {
    /// Assembles a model from stored parameters. `weights` need not be
    /// normalized; they are normalized on use.
    pub fn from_parts(
        weights: Vec<f64>,
        means: Array2<f64>,
        variances: Array2<f64>,
        scale: ScoreScale,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.nrows() != k || variances.dim() != means.dim() {
            return Err(Error::InvalidArgument("inconsistent mixture parameter shapes".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("mixture weights must be non-negative".into()));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v >= VARIANCE_FLOOR)) {
            return Err(Error::InvalidArgument("variances must be finite and floored".into()));
        }
        if means.iter().any(|m| !m.is_finite()) || !(scale.train_min < scale.train_max) {
            return Err(Error::InvalidArgument("invalid mixture means or scale".into()));
        }
        let total: f64 = weights.iter().sum();
        let log_weights = weights.iter().map(|w| (w / total).ln()).collect();
        Ok(GmmModel {
            raw_weights: weights,
            log_weights,
            means,
            variances,
            scale,
            silhouettes: Vec::new(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.raw_weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    /// Normalized mixture weights.
    pub fn weights(&self) -> Vec<f64> {
        let total: f64 = self.raw_weights.iter().sum();
        self.raw_weights.iter().map(|w| w / total).collect()
    }

    /// Weights exactly as stored.
    pub fn stored_weights(&self) -> &[f64] {
        &self.raw_weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn variances(&self) -> &Array2<f64> {
        &self.variances
    }

    pub fn scale(&self) -> ScoreScale {
        self.scale
    }

    pub fn log_density(&self, x: ArrayView1<f64>) -> f64 {
        mixture_log_density(&self.log_weights, &self.means, &self.variances, x, &mut Vec::new())
    }

    /// Log-likelihood divided by the embedding dimension.
    pub fn raw_score(&self, x: ArrayView1<f64>) -> f64 {
        self.log_density(x) / self.dim() as f64
    }
}

fn snap_floor(v: f64) -> f64 {
    let s = v as f32;
    if (s as f64) < VARIANCE_FLOOR {
        // round up past the floor
        f32::from_bits(s.to_bits() + 1) as f64
    } else {
        s as f64
    }
}

/// Fits mixtures for every component count in `[k_min, k_max]` and keeps
/// the one whose hard assignment has the highest silhouette.
pub fn fit_gmm(data: ArrayView2<f64>, config: &GmmConfig) -> Result<GmmModel> {
    let (n, d) = data.dim();
    if config.k_min == 0 || config.k_min > config.k_max {
        return Err(Error::InvalidArgument(format!(
            "invalid component range [{}, {}]",
            config.k_min, config.k_max
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
    }
    let needed = config.k_max * 2;
    if n < needed {
        return Err(Error::InsufficientData { needed, found: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sample: Vec<usize> = if n > config.silhouette_sample {
        rand::seq::index::sample(&mut rng, n, config.silhouette_sample).into_vec()
    } else {
        (0..n).collect()
    };
    sample.sort_unstable();
    let distances = pairwise_distances(data.select(Axis(0), &sample).view());

    let mut best: Option<(f64, EmFit)> = None;
    let mut silhouettes = Vec::new();
    for k in config.k_min..=config.k_max {
        let fit = fit_em(data, k, config.max_iter, config.tol, config.seed.wrapping_add(k as u64))?;
        let labels: Vec<usize> = sample.iter().map(|&i| fit.labels[i]).collect();
        let sil = if k >= 2 {
            silhouette_from_distances(&distances, &labels)
        } else {
            None
        };
        log::debug!("gmm k={k}: silhouette {sil:?}, {} EM steps", fit.log_likelihoods.len());
        silhouettes.push((k, sil));
        let key = sil.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _)| key > *b) {
            best = Some((key, fit));
        }
    }
    let (_, fit) = best.expect("non-empty component range");

    let weights: Vec<f64> = fit.weights.iter().map(|&w| snap(w)).collect();
    let means = fit.means.mapv(snap);
    let variances = fit.variances.mapv(snap_floor);
    let provisional = GmmModel::from_parts(
        weights.clone(),
        means.clone(),
        variances.clone(),
        ScoreScale {
            train_min: 0.0,
            train_max: 1.0,
        },
    )?;
    let raw: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| provisional.raw_score(data.row(i)))
        .collect();
    let mut model = GmmModel::from_parts(weights, means, variances, ScoreScale::from_scores(&raw))?;
    model.silhouettes = silhouettes;
    Ok(model)
}

pub fn score_gmm(model: &GmmModel, e: &EmbeddingVector) -> Result<SimilarityScore> {
    check_dim(model.dim(), e)?;
    let raw = model.raw_score(ArrayView1::from(e.values()));
    Ok(model.scale.apply(raw))
}
