//! Random adjacency matrices with a prescribed mean, and their empirical
//! averages.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`).
//! For each sample in turn, entries are visited row by row over `i < j`:
//!
//! * Bernoulli: one `f64` is drawn uniformly from `[0, 1)` and the edge is
//!   present when it is below `Δ_ij`.
//! * Poisson: a count is drawn with `rand_distr::Poisson` at rate `Δ_ij`;
//!   zero rates yield 0 without consuming randomness.
//! * ExactWeight: `Δ_ij` itself, no randomness.
//!
//! The lower triangle mirrors the upper one and the diagonal is zero.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{expected_adjacency, ExpectedMatrix, MatrixKind, ModelError, ParameterSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("{distribution:?} needs a mean in {allowed}, but entry ({}, {}) is {value}", .row + 1, .col + 1)]
    RangeError {
        distribution: LinkDistribution,
        row: usize,
        col: usize,
        value: f64,
        allowed: &'static str,
    },
    #[error("sample count must be at least 1")]
    ZeroCount,
    #[error("no samples to average")]
    EmptyInput,
    #[error("sample {index} is {rows}x{cols}, expected {n}x{n}")]
    DimensionMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkDistribution {
    Bernoulli,
    Poisson,
    #[serde(rename = "exact")]
    ExactWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub distribution: LinkDistribution,
    pub seed: u64,
    pub count: usize,
}

/// The pinned generator for a given seed.
pub fn rng_for_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `cfg.count` independent symmetric zero-diagonal matrices whose
/// off-diagonal means are the expected matrix of `sys`.
pub fn sample_adjacency(
    sys: &ParameterSystem,
    cfg: &SampleConfig,
) -> Result<Vec<DMatrix<f64>>, SampleError> {
    let delta = expected_adjacency(sys)?;
    sample_from_mean(delta.matrix(), cfg)
}

/// Same as [`sample_adjacency`], starting from the mean matrix directly.
/// Only the strict upper triangle of `mean` is read.
pub fn sample_from_mean(
    mean: &DMatrix<f64>,
    cfg: &SampleConfig,
) -> Result<Vec<DMatrix<f64>>, SampleError> {
    if cfg.count == 0 {
        return Err(SampleError::ZeroCount);
    }
    let n = mean.nrows();
    check_range(mean, cfg.distribution)?;

    let poisson: Vec<Option<Poisson<f64>>> = match cfg.distribution {
        LinkDistribution::Poisson => upper(n)
            .map(|(i, j)| {
                let rate = mean[(i, j)];
                (rate > 0.0).then(|| Poisson::new(rate).expect("finite positive rate"))
            })
            .collect(),
        _ => Vec::new(),
    };

    let mut rng = rng_for_seed(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    for _ in 0..cfg.count {
        let mut a = DMatrix::zeros(n, n);
        for (idx, (i, j)) in upper(n).enumerate() {
            let v = match cfg.distribution {
                LinkDistribution::Bernoulli => {
                    if rng.random::<f64>() < mean[(i, j)] {
                        1.0
                    } else {
                        0.0
                    }
                }
                LinkDistribution::Poisson => match &poisson[idx] {
                    Some(dist) => dist.sample(&mut rng),
                    None => 0.0,
                },
                LinkDistribution::ExactWeight => mean[(i, j)],
            };
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        out.push(a);
    }
    Ok(out)
}

fn upper(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

fn check_range(mean: &DMatrix<f64>, distribution: LinkDistribution) -> Result<(), SampleError> {
    let (ok, allowed): (fn(f64) -> bool, &'static str) = match distribution {
        LinkDistribution::Bernoulli => (|v| (0.0..=1.0).contains(&v), "[0, 1]"),
        LinkDistribution::Poisson => (|v| v >= 0.0 && v.is_finite(), "[0, inf)"),
        LinkDistribution::ExactWeight => (|v| v.is_finite(), "the finite reals"),
    };
    match upper(mean.nrows()).find(|&(i, j)| !ok(mean[(i, j)])) {
        Some((row, col)) => Err(SampleError::RangeError {
            distribution,
            row,
            col,
            value: mean[(row, col)],
            allowed,
        }),
        None => Ok(()),
    }
}

/// Entrywise mean of the samples, with the diagonal forced to zero.
pub fn empirical_mean(samples: &[DMatrix<f64>]) -> Result<ExpectedMatrix, SampleError> {
    let first = samples.first().ok_or(SampleError::EmptyInput)?;
    let n = first.nrows();
    let mut sum = DMatrix::zeros(n, n);
    for (index, s) in samples.iter().enumerate() {
        if s.nrows() != n || s.ncols() != n {
            return Err(SampleError::DimensionMismatch {
                index,
                rows: s.nrows(),
                cols: s.ncols(),
                n,
            });
        }
        sum += s;
    }
    let mut mean = sum / samples.len() as f64;
    mean.fill_diagonal(0.0);
    crate::linalg::symmetrize(&mut mean);
    Ok(ExpectedMatrix::new(mean, MatrixKind::DiagonalDeleted)?)
}
