//! Variational autoencoder scored by its ELBO loss.
//!
//! Encoder `D → H` (ReLU) with linear heads for the latent mean and
//! log-variance; decoder `L → H` (ReLU) `→ D`. Per-sample loss is the summed
//! squared reconstruction error plus the closed-form KL divergence to the
//! standard normal prior. Gradients are derived by hand and optimized with
//! Adam.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_dim, snap, SimilarityScore};
use crate::embeddings::EmbeddingVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeConfig {
    pub hidden: usize,
    pub latent: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            hidden: 128,
            latent: 32,
            epochs: 50,
            batch: 64,
            learning_rate: 1e-3,
            seed: 42,
        }
    }
}

/// All network weights. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeParams {
    pub enc_w: Array2<f64>,
    pub enc_b: Array1<f64>,
    pub mu_w: Array2<f64>,
    pub mu_b: Array1<f64>,
    pub logvar_w: Array2<f64>,
    pub logvar_b: Array1<f64>,
    pub dec_w: Array2<f64>,
    pub dec_b: Array1<f64>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

pub type VaeGradients = VaeParams;

/// Tensor names in storage order.
pub const VAE_TENSOR_NAMES: [&str; 10] = [
    "enc_w", "enc_b", "mu_w", "mu_b", "logvar_w", "logvar_b", "dec_w", "dec_b", "out_w", "out_b",
];

impl VaeParams {
    pub fn zeros(dim: usize, hidden: usize, latent: usize) -> Self {
        VaeParams {
            enc_w: Array2::zeros((dim, hidden)),
            enc_b: Array1::zeros(hidden),
            mu_w: Array2::zeros((hidden, latent)),
            mu_b: Array1::zeros(latent),
            logvar_w: Array2::zeros((hidden, latent)),
            logvar_b: Array1::zeros(latent),
            dec_w: Array2::zeros((latent, hidden)),
            dec_b: Array1::zeros(hidden),
            out_w: Array2::zeros((hidden, dim)),
            out_b: Array1::zeros(dim),
        }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn init(dim: usize, hidden: usize, latent: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = VaeParams::zeros(dim, hidden, latent);
        let fan_ins = [dim, dim, hidden, hidden, hidden, hidden, latent, latent, hidden, hidden];
        for (slice, fan_in) in p.slices_mut().into_iter().zip(fan_ins) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            slice.iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.enc_w.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.enc_w.ncols()
    }

    pub fn latent(&self) -> usize {
        self.mu_w.ncols()
    }

    /// Shapes in [`VAE_TENSOR_NAMES`] order.
    pub fn shapes(&self) -> [Vec<usize>; 10] {
        [
            self.enc_w.shape().to_vec(),
            self.enc_b.shape().to_vec(),
            self.mu_w.shape().to_vec(),
            self.mu_b.shape().to_vec(),
            self.logvar_w.shape().to_vec(),
            self.logvar_b.shape().to_vec(),
            self.dec_w.shape().to_vec(),
            self.dec_b.shape().to_vec(),
            self.out_w.shape().to_vec(),
            self.out_b.shape().to_vec(),
        ]
    }

    pub fn slices(&self) -> [&[f64]; 10] {
        [
            self.enc_w.as_slice().unwrap(),
            self.enc_b.as_slice().unwrap(),
            self.mu_w.as_slice().unwrap(),
            self.mu_b.as_slice().unwrap(),
            self.logvar_w.as_slice().unwrap(),
            self.logvar_b.as_slice().unwrap(),
            self.dec_w.as_slice().unwrap(),
            self.dec_b.as_slice().unwrap(),
            self.out_w.as_slice().unwrap(),
            self.out_b.as_slice().unwrap(),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 10] {
        [
            self.enc_w.as_slice_mut().unwrap(),
            self.enc_b.as_slice_mut().unwrap(),
            self.mu_w.as_slice_mut().unwrap(),
            self.mu_b.as_slice_mut().unwrap(),
            self.logvar_w.as_slice_mut().unwrap(),
            self.logvar_b.as_slice_mut().unwrap(),
            self.dec_w.as_slice_mut().unwrap(),
            self.dec_b.as_slice_mut().unwrap(),
            self.out_w.as_slice_mut().unwrap(),
            self.out_b.as_slice_mut().unwrap(),
        ]
    }

    /// Rebuilds parameters from flat row-major tensors in
    /// [`VAE_TENSOR_NAMES`] order.
    pub fn from_tensors(dim: usize, hidden: usize, latent: usize, tensors: &[Vec<f64>]) -> Result<Self> {
        let mut p = VaeParams::zeros(dim, hidden, latent);
        if tensors.len() != 10 {
            return Err(Error::InvalidArgument(format!("expected 10 VAE tensors, got {}", tensors.len())));
        }
        for (slot, t) in p.slices_mut().into_iter().zip(tensors) {
            if slot.len() != t.len() {
                return Err(Error::DimensionMismatch {
                    expected: slot.len(),
                    found: t.len(),
                });
            }
            slot.copy_from_slice(t);
        }
        if p.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite VAE parameter".into()));
        }
        Ok(p)
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for slot in self.slices_mut() {
            let n = slot.len();
            slot.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    fn encode(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
        let pre = x.dot(&self.enc_w) + &self.enc_b;
        let h = pre.mapv(|v| v.max(0.0));
        let mu = h.dot(&self.mu_w) + &self.mu_b;
        let logvar = h.dot(&self.logvar_w) + &self.logvar_b;
        (pre, h, mu, logvar)
    }

    fn decode(&self, z: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let pre = z.dot(&self.dec_w) + &self.dec_b;
        let h = pre.mapv(|v| v.max(0.0));
        let out = h.dot(&self.out_w) + &self.out_b;
        (pre, h, out)
    }

    /// Per-sample reconstruction error and KL term, using `z = μ`.
    pub fn elbo_terms(&self, x: ArrayView1<f64>) -> (f64, f64) {
        let x2 = x.insert_axis(Axis(0));
        let (_, _, mu, logvar) = self.encode(x2);
        let (_, _, recon) = self.decode(&mu);
        let rec: f64 = x2.iter().zip(recon.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        (rec, kl_divergence(mu.row(0), logvar.row(0)))
    }

    /// Mean per-sample loss over the batch and its gradient with respect to
    /// every parameter, for a given reparameterization noise `eps` (B × L).
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, eps: ArrayView2<f64>) -> (f64, VaeGradients) {
        let b = x.nrows() as f64;
        let (enc_pre, enc_h, mu, logvar) = self.encode(x);
        let std = logvar.mapv(|v| (0.5 * v).exp());
        let z = &mu + &(&std * &eps);
        let (dec_pre, dec_h, recon) = self.decode(&z);

        let diff = &recon - &x;
        let rec: f64 = diff.iter().map(|d| d * d).sum();
        let kl: f64 = mu
            .outer_iter()
            .zip(logvar.outer_iter())
            .map(|(m, lv)| kl_divergence(m, lv))
            .sum();
        let loss = (rec + kl) / b;

        let d_recon = diff.mapv(|d| 2.0 * d / b);
        let out_w = dec_h.t().dot(&d_recon);
        let out_b = d_recon.sum_axis(Axis(0));
        let mut d_dec = d_recon.dot(&self.out_w.t());
        d_dec.zip_mut_with(&dec_pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
        let dec_w = z.t().dot(&d_dec);
        let dec_b = d_dec.sum_axis(Axis(0));
        let d_z = d_dec.dot(&self.dec_w.t());

        let d_mu = &d_z + &mu.mapv(|m| m / b);
        let d_logvar = &d_z * &eps * &std * 0.5 + &logvar.mapv(|lv| 0.5 * (lv.exp() - 1.0) / b);
        let mu_w = enc_h.t().dot(&d_mu);
        let mu_b = d_mu.sum_axis(Axis(0));
        let logvar_w = enc_h.t().dot(&d_logvar);
        let logvar_b = d_logvar.sum_axis(Axis(0));
        let mut d_enc = d_mu.dot(&self.mu_w.t()) + d_logvar.dot(&self.logvar_w.t());
        d_enc.zip_mut_with(&enc_pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
        let enc_w = x.t().dot(&d_enc);
        let enc_b = d_enc.sum_axis(Axis(0));

        (
            loss,
            VaeParams {
                enc_w,
                enc_b,
                mu_w,
                mu_b,
                logvar_w,
                logvar_b,
                dec_w,
                dec_b,
                out_w,
                out_b,
            },
        )
    }

    /// Mean per-sample loss only.
    pub fn loss(&self, x: ArrayView2<f64>, eps: ArrayView2<f64>) -> f64 {
        let (_, _, mu, logvar) = self.encode(x);
        let z = &mu + &(&logvar.mapv(|v| (0.5 * v).exp()) * &eps);
        let (_, _, recon) = self.decode(&z);
        let rec: f64 = recon.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let kl: f64 = mu
            .outer_iter()
            .zip(logvar.outer_iter())
            .map(|(m, lv)| kl_divergence(m, lv))
            .sum();
        (rec + kl) / x.nrows() as f64
    }
}

/// `KL(N(μ, σ²) ‖ N(0, I))` in closed form.
pub fn kl_divergence(mu: ArrayView1<f64>, logvar: ArrayView1<f64>) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut VaeParams, grads: &VaeGradients) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let mut offset = 0;
        for (p, g) in params.slices_mut().into_iter().zip(grads.slices()) {
            for (i, (pi, &gi)) in p.iter_mut().zip(g).enumerate() {
                let m = &mut self.m[offset + i];
                let v = &mut self.v[offset + i];
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * gi;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * gi * gi;
                *pi -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            }
            offset += g.len();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    params: VaeParams,
}

#[derive(Debug, Clone)]
pub struct VaeTrainingReport {
    pub model: VaeModel,
    /// Mean per-sample training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl VaeModel {
    pub fn from_params(params: VaeParams) -> Result<Self> {
        if params.slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite VAE parameter".into()));
        }
        Ok(VaeModel { params })
    }

    pub fn params(&self) -> &VaeParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn hidden(&self) -> usize {
        self.params.hidden()
    }

    pub fn latent(&self) -> usize {
        self.params.latent()
    }

    /// Deterministic ELBO loss (reconstruction + KL) divided by the input
    /// dimension.
    pub fn normalized_loss(&self, x: ArrayView1<f64>) -> f64 {
        let (rec, kl) = self.params.elbo_terms(x);
        (rec + kl) / self.dim() as f64
    }

    /// `e^{-loss}`.
    pub fn score_from_loss(loss: f64) -> SimilarityScore {
        SimilarityScore::new((-loss).exp())
    }
}

pub fn fit_vae(data: ArrayView2<f64>, config: &VaeConfig) -> Result<VaeModel> {
    fit_vae_with_report(data, config).map(|r| r.model)
}

pub fn fit_vae_with_report(data: ArrayView2<f64>, config: &VaeConfig) -> Result<VaeTrainingReport> {
    let (n, dim) = data.dim();
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    if dim == 0 || config.hidden == 0 || config.latent == 0 || config.batch == 0 || config.epochs == 0 {
        return Err(Error::InvalidArgument("VAE sizes, batch and epochs must be positive".into()));
    }
    if n < 2 * config.batch {
        log::warn!("training VAE on {n} samples with batch size {}", config.batch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = VaeParams::init(dim, config.hidden, config.latent, &mut rng);
    let mut adam = Adam::new(params.flatten().len(), config.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch).enumerate() {
            let x = data.select(Axis(0), chunk);
            let eps = Array2::from_shape_fn((chunk.len(), config.latent), |_| rng.sample(StandardNormal));
            let (loss, grads) = params.loss_and_gradients(x.view(), eps.view());
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_idx + 1,
                });
            }
            adam.step(&mut params, &grads);
            total += loss * chunk.len() as f64;
        }
        let mean = total / n as f64;
        log::debug!("vae epoch {}: mean loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }

    for slice in params.slices_mut() {
        slice.iter_mut().for_each(|v| *v = snap(*v));
    }
    Ok(VaeTrainingReport {
        model: VaeModel::from_params(params)?,
        epoch_losses,
    })
}

pub fn score_vae(model: &VaeModel, e: &EmbeddingVector) -> Result<SimilarityScore> {
    check_dim(model.dim(), e)?;
    Ok(VaeModel::score_from_loss(model.normalized_loss(ArrayView1::from(e.values()))))
}
