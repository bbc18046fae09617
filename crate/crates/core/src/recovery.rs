//! Recovering parameter systems from expected matrices.
//!
//! Two routes are provided. [`spectral_recover`] works on a full Δ: the
//! rows of the nonzero-eigenvalue eigenvectors are positive multiples of one
//! row per community, scaled by θ. [`offdiag_recover`] works on Δ with its
//! diagonal deleted: the community partition comes from comparing rows
//! outside the pair under test ([`offdiag_partition`]), each within-community
//! θ ratio is read off a third "witness" node, and the diagonal is rebuilt
//! from the recovered parameters. [`lowrank_complete`] is an independent
//! numerical cross-check that fills the diagonal by rank-K fixed-point
//! iteration.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::equivalence::canonicalize;
use crate::linalg::{self, count_above, sorted_symmetric_eigen};
use crate::model::{
    check_min_size, expected_adjacency, validate_system, ConnectivityMatrix, DegreeParams,
    ExpectedMatrix, MatrixKind, ModelError, ParameterSystem, DEFAULT_RANK_TOL,
};
use crate::partitions::{
    closure, membership_from_partition, row_proportional_partition, Partition, PartitionError,
};

pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_CONV_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("expected a {expected} matrix, got {found}")]
    WrongKind {
        expected: MatrixKind,
        found: MatrixKind,
    },
    #[error("numerical rank is {found}, expected {expected}")]
    RankMismatch { expected: usize, found: usize },
    #[error("found {found} clusters, expected {expected}")]
    ClusterCountMismatch { expected: usize, found: usize },
    #[error("off-diagonal recovery needs at least 4 nodes, got {n}")]
    TooSmall { n: usize },
    #[error("parameters are not identifiable: {0}")]
    NonIdentifiable(Box<NonIdentifiable>),
    #[error("recovered system is invalid: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Diagnostics for an off-diagonal matrix that does not pin down θ or B.
#[derive(Debug, Clone, PartialEq)]
pub struct NonIdentifiable {
    /// Nodes whose θ ratio (or whose community's B diagonal) is undetermined.
    pub nodes: Vec<usize>,
    pub witness_counts: Vec<usize>,
    pub partition: Partition,
    pub detail: String,
}

impl std::fmt::Display for NonIdentifiable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.detail)
    }
}

/// Eigenvectors and eigenvalues for the `K` largest-magnitude eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// `n × K`, orthonormal columns.
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

/// Keeps the `k` leading eigenpairs, after checking that exactly `k`
/// eigenvalues exceed `rank_tol · max|λ|`.
pub fn spectral_decomposition(
    m: &DMatrix<f64>,
    k: usize,
    rank_tol: f64,
) -> Result<SpectralDecomposition, RecoveryError> {
    let eig = sorted_symmetric_eigen(m);
    let rank = count_above(eig.values.as_slice(), rank_tol);
    if rank != k {
        return Err(RecoveryError::RankMismatch {
            expected: k,
            found: rank,
        });
    }
    Ok(SpectralDecomposition {
        vectors: eig.vectors.columns(0, k).into_owned(),
        values: eig.values.iter().take(k).copied().collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    /// Recovered parameters, in canonical gauge.
    pub system: ParameterSystem,
    /// Max entrywise mismatch between input and reconstruction, relative to
    /// the largest input entry. Off-diagonal entries only for
    /// [`offdiag_recover`].
    pub residual: f64,
    /// Reconstructed diagonal `θ_i² B[z_i][z_i]`.
    pub diagonal: Vec<f64>,
    /// Per node, the number of witnesses that fixed its θ ratio. Empty for
    /// spectral recovery.
    pub witness_counts: Vec<usize>,
    /// Per node, the spread (max − min) of its θ estimates; for spectral
    /// recovery, the deviation of its normalized eigenvector row from its
    /// community's reference row.
    pub theta_spread: Vec<f64>,
    pub flags: Vec<String>,
}

/// Recovery from the full expected matrix.
///
/// Clusters the rows of the leading eigenvectors by positive
/// proportionality, takes θ ratios from row norms, fixes θ = 1 at each
/// community's minimum member, and averages `Δ[p][q] / (θ_p θ_q)` over all
/// pairs (diagonal included) to estimate `B`.
pub fn spectral_recover(
    delta: &ExpectedMatrix,
    k: usize,
    tol: f64,
    rank_tol: f64,
) -> Result<RecoveryReport, RecoveryError> {
    if delta.kind() != MatrixKind::Full {
        return Err(RecoveryError::WrongKind {
            expected: MatrixKind::Full,
            found: delta.kind(),
        });
    }
    let m = delta.matrix();
    let spectral = spectral_decomposition(m, k, rank_tol)?;
    let (partition, norms) = row_proportional_partition(&spectral.vectors, tol)?;
    if partition.len() != k {
        return Err(RecoveryError::ClusterCountMismatch {
            expected: k,
            found: partition.len(),
        });
    }

    let n = delta.n();
    let mut theta = vec![0.0; n];
    let mut spread = vec![0.0; n];
    for block in partition.blocks() {
        let rep = block[0];
        let rep_unit = spectral.vectors.row(rep) / norms[rep];
        for &i in block {
            theta[i] = norms[i] / norms[rep];
            spread[i] = (spectral.vectors.row(i) / norms[i] - &rep_unit).amax();
        }
        theta[rep] = 1.0;
    }

    let b = block_means(m, &partition, &theta, true);
    let system = assemble(&partition, theta, b)?;
    let fitted = expected_adjacency(&system)?;
    let residual = relative_residual(m, fitted.matrix(), true);
    Ok(RecoveryReport {
        diagonal: reconstruct_diagonal(&system),
        system,
        residual,
        witness_counts: Vec::new(),
        theta_spread: spread,
        flags: vec!["spectral".into()],
    })
}

/// Community partition of a diagonal-deleted matrix.
///
/// Nodes `i` and `j` are related when their rows, restricted to the other
/// `n − 2` nodes, have the same zero pattern (entries at most
/// `tol · max|pd|` count as zero) and agree within `tol` after dividing each
/// by its largest absolute entry on the common support. The relation is closed with
/// union-find.
pub fn offdiag_partition(pd: &ExpectedMatrix, tol: f64) -> Result<Partition, RecoveryError> {
    require_offdiag(pd)?;
    let n = pd.n();
    if n < 4 {
        return Err(RecoveryError::TooSmall { n });
    }
    let m = pd.matrix();
    let zero_thr = tol * linalg::max_abs(m);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    Ok(closure(n, |i, j| {
        a.clear();
        b.clear();
        for col in (0..n).filter(|&c| c != i && c != j) {
            let (x, y) = (m[(i, col)], m[(j, col)]);
            match (x.abs() > zero_thr, y.abs() > zero_thr) {
                (true, true) => {
                    a.push(x);
                    b.push(y);
                }
                (false, false) => {}
                _ => return false,
            }
        }
        let na = a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        let nb = b.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        a.iter()
            .zip(&b)
            .all(|(x, y)| (x / na - y / nb).abs() <= tol)
    }))
}

/// Recovery from the diagonal-deleted expected matrix.
///
/// For each community with minimum member `r` (θ = 1), every other member
/// `i` takes `θ_i = pd[i][m] / pd[r][m]` averaged over witnesses
/// `m ∉ {i, r}` with `|pd[r][m]| > tol · max|pd|`. `B[k][l]` averages
/// `pd[p][q] / (θ_p θ_q)` over distinct pairs. Returns
/// [`RecoveryError::NonIdentifiable`] when a node has no witness or a
/// community is a singleton.
pub fn offdiag_recover(pd: &ExpectedMatrix, tol: f64) -> Result<RecoveryReport, RecoveryError> {
    let partition = offdiag_partition(pd, tol)?;
    let m = pd.matrix();
    let n = pd.n();
    let thr = tol * linalg::max_abs(m);

    let mut theta = vec![1.0; n];
    let mut spread = vec![0.0; n];
    let mut witness_counts = vec![0usize; n];
    let mut undetermined = Vec::new();
    let mut reasons = Vec::new();

    for block in partition.blocks() {
        let rep = block[0];
        if block.len() == 1 {
            undetermined.push(rep);
            reasons.push(format!(
                "node {} is alone in its community, so its B diagonal entry is unobserved",
                rep + 1
            ));
            continue;
        }
        let mut rep_count = 0;
        for &i in &block[1..] {
            let estimates: Vec<f64> = (0..n)
                .filter(|&w| w != i && w != rep && m[(rep, w)].abs() > thr)
                .map(|w| m[(i, w)] / m[(rep, w)])
                .collect();
            witness_counts[i] = estimates.len();
            rep_count = rep_count.max(estimates.len());
            if estimates.is_empty() {
                undetermined.push(i);
                reasons.push(format!(
                    "no witness fixes the degree ratio of nodes {} and {}",
                    rep + 1,
                    i + 1
                ));
                continue;
            }
            theta[i] = estimates.iter().sum::<f64>() / estimates.len() as f64;
            let (lo, hi) = estimates
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                    (lo.min(e), hi.max(e))
                });
            spread[i] = hi - lo;
        }
        witness_counts[rep] = rep_count;
        if rep_count == 0 {
            undetermined.push(rep);
        }
    }

    if !undetermined.is_empty() {
        undetermined.sort_unstable();
        undetermined.dedup();
        return Err(RecoveryError::NonIdentifiable(Box::new(NonIdentifiable {
            nodes: undetermined,
            witness_counts,
            partition,
            detail: reasons.join("; "),
        })));
    }

    let b = block_means(m, &partition, &theta, false);
    let system = assemble(&partition, theta, b)?;
    let fitted = expected_adjacency(&system)?;
    let residual = relative_residual(m, fitted.matrix(), false);

    let mut flags = vec!["offdiag".to_string()];
    if !check_min_size(system.z(), 3) {
        flags.push("below_size_threshold_but_determined".into());
    }
    Ok(RecoveryReport {
        diagonal: reconstruct_diagonal(&system),
        system,
        residual,
        witness_counts,
        theta_spread: spread,
        flags,
    })
}

/// Result of [`lowrank_complete`].
#[derive(Debug, Clone)]
pub struct Completion {
    pub matrix: ExpectedMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Fills the diagonal of `pd` by fixed-point iteration: starting from a
/// zero diagonal, replace the diagonal by that of the best rank-`k`
/// approximation until it moves by at most `conv_tol`.
pub fn lowrank_complete(
    pd: &ExpectedMatrix,
    k: usize,
    max_iter: usize,
    conv_tol: f64,
) -> Result<Completion, RecoveryError> {
    require_offdiag(pd)?;
    let n = pd.n();
    let mut x = pd.matrix().clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let y = linalg::truncate_rank(&x, k);
        let mut step = 0.0_f64;
        for i in 0..n {
            step = step.max((y[(i, i)] - x[(i, i)]).abs());
            x[(i, i)] = y[(i, i)];
        }
        if step <= conv_tol {
            converged = true;
            break;
        }
    }
    Ok(Completion {
        matrix: ExpectedMatrix::new(x, MatrixKind::Full)?,
        iterations,
        converged,
    })
}

/// How far `pd + diag(diagonal)` is from rank `k`: the largest entry of its
/// difference from the best rank-`k` approximation, relative to its largest
/// entry.
pub fn completion_residual(pd: &ExpectedMatrix, diagonal: &[f64], k: usize) -> f64 {
    let mut x = pd.matrix().clone();
    for (i, &d) in diagonal.iter().enumerate() {
        x[(i, i)] = d;
    }
    let scale = linalg::max_abs(&x);
    let diff = (&x - linalg::truncate_rank(&x, k)).amax();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// `θ_i² B[z_i][z_i]` for every node.
pub fn reconstruct_diagonal(sys: &ParameterSystem) -> Vec<f64> {
    sys.theta()
        .iter()
        .zip(sys.z().labels())
        .map(|(&t, &l)| t * t * sys.b().get(l, l))
        .collect()
}

fn require_offdiag(pd: &ExpectedMatrix) -> Result<(), RecoveryError> {
    if pd.kind() != MatrixKind::DiagonalDeleted {
        return Err(RecoveryError::WrongKind {
            expected: MatrixKind::DiagonalDeleted,
            found: pd.kind(),
        });
    }
    Ok(())
}

/// Mean of `m[p][q] / (θ_p θ_q)` over `p` in block `k`, `q` in block `l`.
/// Pairs with `p = q` are skipped unless `with_diagonal`.
fn block_means(
    m: &DMatrix<f64>,
    partition: &Partition,
    theta: &[f64],
    with_diagonal: bool,
) -> DMatrix<f64> {
    let blocks = partition.blocks();
    let k = blocks.len();
    let mut b = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in r..k {
            let mut sum = 0.0;
            let mut count = 0usize;
            for &p in &blocks[r] {
                for &q in &blocks[c] {
                    if p == q && !with_diagonal {
                        continue;
                    }
                    sum += m[(p, q)] / (theta[p] * theta[q]);
                    count += 1;
                }
            }
            let v = if count > 0 {
                sum / count as f64
            } else {
                f64::NAN
            };
            b[(r, c)] = v;
            b[(c, r)] = v;
        }
    }
    b
}

fn assemble(
    partition: &Partition,
    theta: Vec<f64>,
    b: DMatrix<f64>,
) -> Result<ParameterSystem, RecoveryError> {
    let z = membership_from_partition(partition);
    let sys = ParameterSystem::new(z, DegreeParams(theta), ConnectivityMatrix(b))?;
    let report = validate_system(&sys, DEFAULT_RANK_TOL);
    if !report.is_valid() {
        return Err(RecoveryError::Degenerate(report.reasons().join("; ")));
    }
    // Blocks are canonical and θ = 1 at each minimum member, so this only
    // guards the invariant.
    let (canon, _) = canonicalize(&sys);
    Ok(canon)
}

fn relative_residual(input: &DMatrix<f64>, fitted: &DMatrix<f64>, with_diagonal: bool) -> f64 {
    let n = input.nrows();
    let mut diff = 0.0_f64;
    let mut scale = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i == j && !with_diagonal {
                continue;
            }
            diff = diff.max((input[(i, j)] - fitted[(i, j)]).abs());
            scale = scale.max(input[(i, j)].abs());
        }
    }
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
