//! Sample batches and Monte Carlo summary statistics.
//!
//! A [`SampleBatch`] is an immutable record of draws plus the metadata needed
//! to interpret them: the seed that produced them, the sampler that made them
//! (direct prior draws, self-normalized importance sampling, or a
//! random-walk Metropolis chain) and optional log-weights.
//!
//! Determinism: batch generation is chunked with a fixed chunk size, and each
//! chunk draws from its own counter-derived RNG stream. Results are therefore
//! bit-identical for a fixed seed regardless of how many worker threads the
//! `WMAP_LAB_THREADS` environment variable allows (default 1).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::priors::Point;

/// Environment variable capping internal parallelism. Unset, unparsable or
/// zero values fall back to 1 worker thread.
pub const THREADS_ENV: &str = "WMAP_LAB_THREADS";

/// Fixed chunk size for parallel batch generation (recorded in provenance).
pub const CHUNK_SIZE: usize = 1024;

/// Number of worker threads the current environment allows.
pub fn configured_threads() -> usize {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().unwrap_or(1).max(1),
        Err(_) => 1,
    }
}

fn worker_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(configured_threads())
            .build()
            .expect("failed to build worker pool")
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for a named purpose, so that e.g. problem
/// generation and posterior sampling never share an RNG stream even when the
/// user passes the same top-level seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(tag)))
}

/// Draws `count` states; chunk `i` uses ChaCha stream `i + 1` of `seed`.
/// Output is identical whether chunks are generated sequentially or in
/// parallel.
pub(crate) fn chunked_draws<F>(count: usize, seed: u64, make: F) -> Vec<Point>
where
    F: Fn(&mut ChaCha8Rng) -> Point + Sync,
{
    let n_chunks = count.div_ceil(CHUNK_SIZE);
    let gen_chunk = |ci: usize| -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64 + 1);
        let lo = ci * CHUNK_SIZE;
        let hi = count.min(lo + CHUNK_SIZE);
        (lo..hi).map(|_| make(&mut rng)).collect()
    };
    if configured_threads() > 1 && n_chunks > 1 {
        worker_pool().install(|| {
            (0..n_chunks)
                .into_par_iter()
                .map(gen_chunk)
                .flatten()
                .collect()
        })
    } else {
        (0..n_chunks).flat_map(gen_chunk).collect()
    }
}

/// How a batch was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSource {
    /// Independent draws from a prior model.
    DirectPrior,
    /// Prior draws carrying self-normalized importance log-weights.
    PriorImportance,
    /// States of a random-walk Metropolis chain (correlated, unweighted).
    RwMetropolis,
}

impl std::fmt::Display for BatchSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BatchSource::DirectPrior => "direct-prior",
            BatchSource::PriorImportance => "prior-importance",
            BatchSource::RwMetropolis => "rw-metropolis",
        };
        f.write_str(s)
    }
}

/// A batch of sampled states with reproducibility metadata.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    draws: Vec<Point>,
    log_weights: Option<Vec<f64>>,
    seed: u64,
    source: BatchSource,
    chunk_size: Option<usize>,
    acceptance_rate: Option<f64>,
    warnings: Vec<String>,
}

impl SampleBatch {
    pub(crate) fn new(
        draws: Vec<Point>,
        log_weights: Option<Vec<f64>>,
        seed: u64,
        source: BatchSource,
        chunk_size: Option<usize>,
        acceptance_rate: Option<f64>,
    ) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let first = &draws[0];
        if draws
            .iter()
            .any(|d| d.trunc() != first.trunc() || std::mem::discriminant(d) != std::mem::discriminant(first))
        {
            return Err(Error::StateMismatch(
                "batch draws must share one state kind and truncation".into(),
            ));
        }
        if let Some(lw) = &log_weights {
            if lw.len() != draws.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} draws but {} log-weights",
                    draws.len(),
                    lw.len()
                )));
            }
            if lw.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
                return Err(Error::NonFinite("importance log-weight".into()));
            }
        }
        let mut batch = Self {
            draws,
            log_weights,
            seed,
            source,
            chunk_size,
            acceptance_rate,
            warnings: Vec::new(),
        };
        if batch.log_weights.is_some() && batch.is_degenerate() {
            batch.warnings.push(format!(
                "effective sample size {:.1} below 1% of {} draws",
                batch.ess(),
                batch.len()
            ));
        }
        if let Some(rate) = acceptance_rate {
            if !(0.1..=0.6).contains(&rate) {
                batch
                    .warnings
                    .push(format!("acceptance rate {rate:.3} outside [0.1, 0.6]"));
            }
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draws(&self) -> &[Point] {
        &self.draws
    }

    /// Consumes the batch, returning the raw draws.
    pub fn into_draws(self) -> Vec<Point> {
        self.draws
    }

    pub fn log_weights(&self) -> Option<&[f64]> {
        self.log_weights.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source(&self) -> BatchSource {
        self.source
    }

    /// Chunk size used for generation (`None` for sequential chains).
    pub fn chunk_size(&self) -> Option<usize> {
        self.chunk_size
    }

    /// Metropolis acceptance rate, when the batch came from a chain.
    pub fn acceptance_rate(&self) -> Option<f64> {
        self.acceptance_rate
    }

    /// Diagnostics collected at construction (degenerate ESS, acceptance rate
    /// outside the healthy band). Flags, not errors.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Self-normalized weights (uniform for unweighted batches).
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let k = self.len();
        match &self.log_weights {
            None => Ok(vec![1.0 / k as f64; k]),
            Some(lw) => {
                let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !max.is_finite() {
                    return Err(Error::DegenerateWeights(
                        "all importance log-weights are -inf".into(),
                    ));
                }
                let mut w: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = w.iter().sum();
                if !(total.is_finite() && total > 0.0) {
                    return Err(Error::DegenerateWeights(
                        "importance weights sum to zero".into(),
                    ));
                }
                w.iter_mut().for_each(|x| *x /= total);
                Ok(w)
            }
        }
    }

    /// Effective sample size `1 / Σ ŵ_i²` (equals `len` when unweighted).
    pub fn ess(&self) -> f64 {
        match self.normalized_weights() {
            Ok(w) => 1.0 / w.iter().map(|x| x * x).sum::<f64>(),
            Err(_) => 0.0,
        }
    }

    /// True when the effective sample size fell below 1% of the batch.
    pub fn is_degenerate(&self) -> bool {
        self.log_weights.is_some() && self.ess() < 0.01 * self.len() as f64
    }

    /// Mean and standard error of per-draw `values` under this batch.
    ///
    /// * weighted batches: self-normalized estimator with its delta-method
    ///   standard error;
    /// * chain batches: plain mean with a batch-means standard error (chains
    ///   are correlated, so the iid formula would be too optimistic);
    /// * direct draws: plain mean with the iid standard error.
    ///
    /// A single-draw batch returns an infinite standard error.
    pub fn summarize(&self, values: &[f64]) -> Result<(f64, f64)> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} draws",
                values.len(),
                self.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("per-draw statistic".into()));
        }
        let k = self.len();
        if self.log_weights.is_some() {
            let w = self.normalized_weights()?;
            let mean: f64 = w.iter().zip(values).map(|(wi, v)| wi * v).sum();
            if k == 1 {
                return Ok((mean, f64::INFINITY));
            }
            let var: f64 = w
                .iter()
                .zip(values)
                .map(|(wi, v)| (wi * (v - mean)).powi(2))
                .sum();
            return Ok((mean, var.sqrt()));
        }
        let mean: f64 = values.iter().sum::<f64>() / k as f64;
        if k == 1 {
            return Ok((mean, f64::INFINITY));
        }
        match self.source {
            BatchSource::RwMetropolis => {
                let batch_len = (k as f64).sqrt().floor() as usize;
                let n_batches = k / batch_len;
                if n_batches < 2 {
                    return Ok((mean, f64::INFINITY));
                }
                let used = n_batches * batch_len;
                let offset = k - used; // prefer the tail of the chain
                let means: Vec<f64> = (0..n_batches)
                    .map(|b| {
                        let lo = offset + b * batch_len;
                        values[lo..lo + batch_len].iter().sum::<f64>() / batch_len as f64
                    })
                    .collect();
                let grand = means.iter().sum::<f64>() / n_batches as f64;
                let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>()
                    / (n_batches as f64 - 1.0);
                Ok((mean, (var / n_batches as f64).sqrt()))
            }
            _ => {
                let var =
                    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k as f64 - 1.0);
                Ok((mean, (var / k as f64).sqrt()))
            }
        }
    }
}
