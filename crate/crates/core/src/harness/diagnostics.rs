//! Posterior summaries, batch-means effective sample size, and the
//! two-run consistency check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::samplers::SampleBatch;

/// Fewest kept samples per chain a summary accepts.
pub const MIN_SAMPLES: usize = 10;

/// Threshold multiplier on the joint Monte Carlo standard error.
pub const COMPARE_SIGMAS: f64 = 3.0;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64], m: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Effective sample size by non-overlapping batch means with batches of
/// `floor(√n)` draws. Clamped to `[1, n]`; a constant series counts as `n`.
pub fn batch_means_ess(v: &[f64]) -> Result<f64> {
    let n = v.len();
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let b = (n as f64).sqrt().floor() as usize;
    let a = n / b;
    let m = mean(v);
    let s2 = variance(v, m);
    if !(s2 > 0.0) {
        return Ok(n as f64);
    }
    let batch_means: Vec<f64> = v.chunks_exact(b).take(a).map(mean).collect();
    let bm = mean(&batch_means);
    let sigma2 = b as f64 * variance(&batch_means, bm);
    if !(sigma2 > 0.0) {
        return Ok(n as f64);
    }
    Ok((n as f64 * s2 / sigma2).clamp(1.0, n as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub ess: Vec<f64>,
    pub mcse: Vec<f64>,
    pub n_samples: usize,
    pub divergences: usize,
    /// Pooled Metropolis acceptance rate (HMC only).
    pub accept_rate: Option<f64>,
}

impl PosteriorSummary {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }
}

/// Summary of one or more chains given as rows of samples. Means and
/// standard deviations pool all chains; the effective sample size is the
/// sum of per-chain values.
pub fn summarize_samples(chains: &[Vec<Vec<f64>>]) -> Result<PosteriorSummary> {
    let first = chains
        .first()
        .and_then(|c| c.first())
        .ok_or_else(|| Error::InvalidArgument("no samples to summarize".into()))?;
    let dim = first.len();
    for c in chains {
        if c.len() < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_SAMPLES} samples per chain, got {}",
                c.len()
            )));
        }
        if let Some(row) = c.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
    }
    let n_samples: usize = chains.iter().map(Vec::len).sum();
    let mut out = PosteriorSummary {
        mean: Vec::with_capacity(dim),
        sd: Vec::with_capacity(dim),
        ess: Vec::with_capacity(dim),
        mcse: Vec::with_capacity(dim),
        n_samples,
        divergences: 0,
        accept_rate: None,
    };
    for i in 0..dim {
        let columns: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|r| r[i]).collect())
            .collect();
        let pooled: Vec<f64> = columns.iter().flatten().copied().collect();
        let m = mean(&pooled);
        let sd = variance(&pooled, m).sqrt();
        let ess = columns
            .iter()
            .map(|c| batch_means_ess(c))
            .sum::<Result<f64>>()?;
        out.mean.push(m);
        out.sd.push(sd);
        out.ess.push(ess);
        out.mcse.push(sd / ess.sqrt());
    }
    Ok(out)
}

/// Summary of sampler output, optionally mapping each sample first (for
/// instance to undo label switching).
pub fn summarize_batches(
    batches: &[SampleBatch],
    map: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<PosteriorSummary> {
    let chains: Vec<Vec<Vec<f64>>> = batches
        .iter()
        .map(|b| b.samples.iter().map(|s| map(s)).collect())
        .collect();
    let mut summary = summarize_samples(&chains)?;
    summary.divergences = batches.iter().map(|b| b.divergences).sum();
    let steps: usize = batches.iter().map(|b| b.n_steps).sum();
    let accepted: Option<f64> = batches
        .iter()
        .map(|b| b.accept_rate.map(|r| r * b.n_steps as f64))
        .sum();
    summary.accept_rate = accepted.map(|a| a / steps as f64);
    Ok(summary)
}

pub fn summarize(batch: &SampleBatch) -> Result<PosteriorSummary> {
    summarize_batches(std::slice::from_ref(batch), <[f64]>::to_vec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionComparison {
    pub delta: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub dimensions: Vec<DimensionComparison>,
    pub pass: bool,
}

/// Per-dimension `|mean_a - mean_b| < 3 √(mcse_a² + mcse_b²)`.
pub fn compare_summaries(a: &PosteriorSummary, b: &PosteriorSummary) -> Result<Comparison> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            got: b.dimension(),
        });
    }
    let dimensions: Vec<DimensionComparison> = (0..a.dimension())
        .map(|i| {
            let delta = (a.mean[i] - b.mean[i]).abs();
            let threshold = COMPARE_SIGMAS * a.mcse[i].hypot(b.mcse[i]);
            DimensionComparison {
                delta,
                threshold,
                pass: delta <= threshold,
            }
        })
        .collect();
    let pass = dimensions.iter().all(|d| d.pass);
    Ok(Comparison { dimensions, pass })
}

pub fn compare_runs(a: &SampleBatch, b: &SampleBatch) -> Result<Comparison> {
    compare_summaries(&summarize(a)?, &summarize(b)?)
}
