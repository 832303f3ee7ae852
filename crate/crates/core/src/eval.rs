//! In-distribution / out-of-distribution evaluation with the scaled
//! stratified accuracy metric.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::detector::{is_drifted, train_pipeline, PipelineConfig};
use crate::error::{Error, Result};

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSplit {
    pub train: Vec<Document>,
    pub held_out: Vec<Document>,
    pub split_fraction: f64,
}

/// Splits every class separately after a seeded shuffle. Each class keeps
/// at least one document on either side.
pub fn stratified_split(docs: &[Document], fraction: f64, seed: u64) -> Result<StratifiedSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let mut classes: BTreeMap<&str, Vec<&Document>> = BTreeMap::new();
    for d in docs {
        let label = d.label.as_deref().ok_or_else(|| Error::UnlabeledDocument(d.id.clone()))?;
        classes.entry(label).or_default().push(d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = StratifiedSplit {
        train: Vec::new(),
        held_out: Vec::new(),
        split_fraction: fraction,
    };
    for (label, mut members) in classes {
        let n = members.len();
        if n < 2 {
            return Err(Error::ClassTooSmall(label.to_owned()));
        }
        members.shuffle(&mut rng);
        let held = (((1.0 - fraction) * n as f64).round() as usize).clamp(1, n - 1);
        split.train.extend(members[..n - held].iter().map(|d| (*d).clone()));
        split.held_out.extend(members[n - held..].iter().map(|d| (*d).clone()));
    }
    Ok(split)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn check_counts(n_iid: u64, n_ood: u64, correct_iid: u64, correct_ood: u64) -> Result<()> {
    if n_iid == 0 || n_ood == 0 {
        return Err(Error::InvalidArgument("accuracy needs non-empty iid and ood sets".into()));
    }
    if correct_iid > n_iid || correct_ood > n_ood {
        return Err(Error::InvalidArgument("correct count exceeds set size".into()));
    }
    Ok(())
}

/// Scaled accuracy as a reduced fraction `(numerator, denominator)`.
pub fn scaled_accuracy_ratio(n_iid: u64, n_ood: u64, correct_iid: u64, correct_ood: u64) -> Result<(u128, u128)> {
    check_counts(n_iid, n_ood, correct_iid, correct_ood)?;
    let (ni, no, ci, co) = (n_iid as u128, n_ood as u128, correct_iid as u128, correct_ood as u128);
    // (ci·no/ni + co) / (2·no) = (ci·no + co·ni) / (2·no·ni)
    let num = ci * no + co * ni;
    let den = 2 * no * ni;
    let g = gcd(num, den).max(1);
    Ok((num / g, den / g))
}

/// `(correct_iid·n_ood/n_iid + correct_ood) / (2·n_ood)`, evaluated exactly
/// and rounded once.
pub fn scaled_accuracy(n_iid: u64, n_ood: u64, correct_iid: u64, correct_ood: u64) -> Result<f64> {
    let (num, den) = scaled_accuracy_ratio(n_iid, n_ood, correct_iid, correct_ood)?;
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub threshold: f64,
    pub n_iid: u64,
    pub n_ood: u64,
    pub correct_iid: u64,
    pub correct_ood: u64,
    pub accuracy: f64,
}

/// Counts held-out documents kept (not drifted) and OOD documents caught
/// (drifted) at `threshold`.
pub fn evaluate_scores(iid_scores: &[f64], ood_scores: &[f64], threshold: f64) -> Result<EvalResult> {
    let correct_iid = iid_scores.iter().filter(|&&s| !is_drifted(s, threshold)).count() as u64;
    let correct_ood = ood_scores.iter().filter(|&&s| is_drifted(s, threshold)).count() as u64;
    let (n_iid, n_ood) = (iid_scores.len() as u64, ood_scores.len() as u64);
    Ok(EvalResult {
        threshold,
        n_iid,
        n_ood,
        correct_iid,
        correct_ood,
        accuracy: scaled_accuracy(n_iid, n_ood, correct_iid, correct_ood)?,
    })
}

/// Thresholds 0, 0.001, …, 1 refined to steps of 0.0001 above 0.99.
pub fn default_threshold_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=990).map(|i| i as f64 / 1000.0).collect();
    grid.extend((9901..=10000).map(|i| i as f64 / 10000.0));
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub split_fraction: f64,
    pub seed: u64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            split_fraction: DEFAULT_SPLIT_FRACTION,
            seed: crate::detector::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub sweep: Vec<EvalResult>,
    /// Highest accuracy in the sweep; the earliest threshold wins ties.
    pub best: EvalResult,
    /// Result at the pipeline's configured threshold.
    pub at_config_threshold: EvalResult,
    pub n_train: usize,
    pub n_dropped: usize,
    pub train_seconds: f64,
    pub infer_seconds: f64,
    pub iid_scores: Vec<f64>,
    pub ood_scores: Vec<f64>,
}

/// Trains on the stratified training part of `iid_docs`, then scores the
/// held-out part and every OOD document at each threshold. A corpus without
/// any labels is one stratum.
pub fn run_benchmark(
    iid_docs: &[Document],
    ood_docs: &[Document],
    config: &PipelineConfig,
    thresholds: &[f64],
    opts: &BenchmarkOptions,
) -> Result<BenchmarkReport> {
    if iid_docs.is_empty() || ood_docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("threshold {t} outside [0, 1]")));
    }
    let unlabeled;
    let iid = if iid_docs.iter().all(|d| d.label.is_none()) {
        unlabeled = iid_docs
            .iter()
            .map(|d| d.clone().with_label("all"))
            .collect::<Vec<_>>();
        &unlabeled[..]
    } else {
        iid_docs
    };
    let split = stratified_split(iid, opts.split_fraction, opts.seed)?;

    let started = Instant::now();
    let pipe = train_pipeline(&split.train, config)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let iid_scores: Vec<f64> = pipe
        .score_payloads(&split.held_out)?
        .iter()
        .map(|v| v.score.value())
        .collect();
    let ood_scores: Vec<f64> = pipe.score_payloads(ood_docs)?.iter().map(|v| v.score.value()).collect();
    let infer_seconds = started.elapsed().as_secs_f64();

    let sweep = thresholds
        .iter()
        .map(|&t| evaluate_scores(&iid_scores, &ood_scores, t))
        .collect::<Result<Vec<_>>>()?;
    let at_config_threshold = evaluate_scores(&iid_scores, &ood_scores, config.threshold)?;
    let best = sweep
        .iter()
        .copied()
        .reduce(|best, r| if r.accuracy > best.accuracy { r } else { best })
        .unwrap_or(at_config_threshold);

    Ok(BenchmarkReport {
        sweep,
        best,
        at_config_threshold,
        n_train: pipe.metadata.n_documents,
        n_dropped: pipe.metadata.n_dropped,
        train_seconds,
        infer_seconds,
        iid_scores,
        ood_scores,
    })
}

pub const CSV_HEADER: [&str; 7] = ["pair", "backend", "model", "threshold", "accuracy", "train_s", "infer_s"];

/// One CSV row per sweep threshold.
pub fn benchmark_csv(pair: &str, config: &PipelineConfig, report: &BenchmarkReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in &report.sweep {
        w.write_record([
            pair.to_owned(),
            config.backend.kind().as_str().to_owned(),
            config.model_kind.as_str().to_owned(),
            r.threshold.to_string(),
            r.accuracy.to_string(),
            format!("{:.6}", report.train_seconds),
            format!("{:.6}", report.infer_seconds),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
