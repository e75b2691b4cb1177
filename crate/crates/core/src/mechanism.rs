//! End-to-end query answering: ingest a CSV column, derive the query
//! sensitivity, calibrate (or accept) a randomizing spec, draw one reciprocal
//! scale and release q(D) + Lap(b_r).
//!
//! A fresh b_r is drawn for every release; the guarantee is per-release and
//! caching noise across calls would void it. Batch releases derive one RNG
//! per (seed, release-index) so parallel runs reproduce bit-for-bit.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dist::DistributionSpec;
use crate::optimizer::{optimize, Metric, OptimizationProblem, OptimizerError};
use crate::privacy::eps_general;

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error("failed to read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row}: non-numeric cell {cell:?} in column {column:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        cell: String,
    },
    #[error("invalid clip range: lo {0} must be below hi {1}")]
    BadClipRange(f64, f64),
    #[error("mean query on an empty dataset has no sensitivity")]
    EmptyDataset,
    #[error("optimizer failed: {0}")]
    Optimizer(#[from] OptimizerError),
}

/// A numeric column loaded from a CSV file with a header row.
#[derive(Debug, Clone)]
pub struct Dataset {
    column: String,
    values: Vec<f64>,
}

impl Dataset {
    pub fn from_csv_path(path: &Path, column: &str) -> Result<Self, MechanismError> {
        let mut reader = csv::Reader::from_path(path)?;
        let idx = reader
            .headers()?
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| MechanismError::MissingColumn(column.to_string()))?;
        let mut values = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let cell = record.get(idx).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| MechanismError::NonNumericCell {
                row: row + 2, // 1-based, after the header
                column: column.to_string(),
                cell: cell.to_string(),
            })?;
            values.push(v);
        }
        Ok(Dataset {
            column: column.to_string(),
            values,
        })
    }

    pub fn from_values(column: &str, values: Vec<f64>) -> Self {
        Dataset {
            column: column.to_string(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn column(&self) -> &str {
        &self.column
    }
}

/// Numeric query over one column. Sum and mean clamp each row into the clip
/// range before aggregating (rows are clamped, not dropped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Query {
    Count,
    Sum { clip_lo: f64, clip_hi: f64 },
    Mean { clip_lo: f64, clip_hi: f64 },
}

impl Query {
    fn validate(&self) -> Result<(), MechanismError> {
        match *self {
            Query::Count => Ok(()),
            Query::Sum { clip_lo, clip_hi } | Query::Mean { clip_lo, clip_hi } => {
                if clip_lo < clip_hi {
                    Ok(())
                } else {
                    Err(MechanismError::BadClipRange(clip_lo, clip_hi))
                }
            }
        }
    }
}

/// L1 sensitivity of the query on a dataset of `n` rows.
pub fn sensitivity(query: &Query, n: usize) -> Result<f64, MechanismError> {
    query.validate()?;
    match *query {
        Query::Count => Ok(1.0),
        Query::Sum { clip_lo, clip_hi } => Ok(clip_hi - clip_lo),
        Query::Mean { clip_lo, clip_hi } => {
            if n == 0 {
                Err(MechanismError::EmptyDataset)
            } else {
                Ok((clip_hi - clip_lo) / n as f64)
            }
        }
    }
}

/// The exact (pre-noise) query answer.
pub fn true_value(dataset: &Dataset, query: &Query) -> f64 {
    match *query {
        Query::Count => dataset.values.len() as f64,
        Query::Sum { clip_lo, clip_hi } => dataset
            .values
            .iter()
            .map(|v| v.clamp(clip_lo, clip_hi))
            .sum(),
        Query::Mean { clip_lo, clip_hi } => {
            let n = dataset.values.len().max(1) as f64;
            dataset
                .values
                .iter()
                .map(|v| v.clamp(clip_lo, clip_hi))
                .sum::<f64>()
                / n
        }
    }
}

/// One release request.
#[derive(Debug, Clone)]
pub struct QueryJob {
    pub dataset: Dataset,
    pub query: Query,
    pub eps_target: f64,
    pub gamma: f64,
    pub metric: Metric,
    pub seed: u64,
    pub spec_override: Option<DistributionSpec>,
    /// Optimizer configuration used when no spec override is given.
    pub restarts: usize,
}

/// Outcome of one release. `true_value` never crosses the serialization
/// boundary; it exists for tests and verification only.
#[derive(Debug, Clone, Serialize)]
pub struct ReleaseRecord {
    #[serde(skip)]
    pub true_value: f64,
    pub noisy_value: f64,
    pub spec_used: DistributionSpec,
    pub eps_certified: f64,
    pub sensitivity: f64,
    #[serde(skip)]
    pub b_r_drawn: f64,
    pub seed: u64,
    #[serde(skip)]
    pub unix_time: u64,
}

/// Release q(D) + Lap(b_r) with 1/b_r freshly drawn from the spec.
pub fn release(job: &QueryJob) -> Result<ReleaseRecord, MechanismError> {
    release_indexed(job, 0)
}

/// Batch of releases with per-index derived RNG streams.
pub fn release_batch(job: &QueryJob, count: usize) -> Result<Vec<ReleaseRecord>, MechanismError> {
    // resolve the spec once; each release still draws its own b_r
    let delta_q = sensitivity(&job.query, job.dataset.len())?;
    let spec = resolve_spec(job, delta_q)?;
    (0..count)
        .map(|i| Ok(release_with_spec(job, &spec, delta_q, i as u64)))
        .collect()
}

fn release_indexed(job: &QueryJob, index: u64) -> Result<ReleaseRecord, MechanismError> {
    let delta_q = sensitivity(&job.query, job.dataset.len())?;
    let spec = resolve_spec(job, delta_q)?;
    Ok(release_with_spec(job, &spec, delta_q, index))
}

fn resolve_spec(job: &QueryJob, delta_q: f64) -> Result<DistributionSpec, MechanismError> {
    if let Some(spec) = &job.spec_override {
        return Ok(spec.clone());
    }
    let problem = OptimizationProblem {
        metric: job.metric,
        restarts: job.restarts,
        seed: job.seed,
        combined: true,
        ..OptimizationProblem::new(job.eps_target, delta_q, job.gamma)
    };
    Ok(optimize(&problem)?.best_spec)
}

fn release_with_spec(
    job: &QueryJob,
    spec: &DistributionSpec,
    delta_q: f64,
    index: u64,
) -> ReleaseRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, index));
    let inv_b = spec.sample_inv_b(&mut rng);
    let b_r = 1.0 / inv_b;
    let noise = sample_laplace(b_r, &mut rng);
    let truth = true_value(&job.dataset, &job.query);
    ReleaseRecord {
        true_value: truth,
        noisy_value: truth + noise,
        spec_used: spec.clone(),
        eps_certified: eps_general(spec, delta_q),
        sensitivity: delta_q,
        b_r_drawn: b_r,
        seed: job.seed,
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    }
}

/// splitmix64 mix of (seed, index) into one stream seed.
pub(crate) fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF Laplace draw with scale b.
pub fn sample_laplace<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v = 1.0 - 2.0 * u.abs();
        if v > 0.0 {
            return -b * u.signum() * v.ln();
        }
    }
}
