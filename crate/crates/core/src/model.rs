//! Parameter systems `(Z, Θ, B)` and the expected adjacency matrix they
//! generate.
//!
//! Community labels are 0-based inside the library. The JSON and CSV formats
//! in [`crate::io`] use 1-based labels.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

/// Default relative threshold on the smallest singular value of `B`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid community assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
}

/// Membership of each node in exactly one of `k` communities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl CommunityAssignment {
    /// Builds an assignment from 0-based labels. Every community in `0..k`
    /// must have at least one member.
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self, ModelError> {
        if labels.is_empty() {
            return Err(ModelError::InvalidAssignment("no nodes".into()));
        }
        if k == 0 || k > labels.len() {
            return Err(ModelError::InvalidAssignment(format!(
                "community count {k} must lie in 1..={}",
                labels.len()
            )));
        }
        let mut seen = vec![false; k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(ModelError::InvalidAssignment(format!(
                    "node {} has label {} outside 1..={k}",
                    i + 1,
                    l + 1
                )));
            }
            seen[l] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(ModelError::InvalidAssignment(format!(
                "community {} has no members",
                empty + 1
            )));
        }
        Ok(Self { labels, k })
    }

    /// Builds an assignment from 1-based labels, as used by external formats.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self, ModelError> {
        let zero_based = labels
            .iter()
            .map(|&l| {
                l.checked_sub(1)
                    .ok_or_else(|| ModelError::InvalidAssignment("label 0 in 1-based input".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(zero_based, k)
    }

    /// Remaps an arbitrary label alphabet onto contiguous communities, in
    /// order of first appearance. Returns the original label of each
    /// community alongside the assignment.
    pub fn from_arbitrary<T: Eq + Hash + Clone>(raw: &[T]) -> Result<(Self, Vec<T>), ModelError> {
        let mut index: HashMap<T, usize> = HashMap::new();
        let mut alphabet = Vec::new();
        let labels = raw
            .iter()
            .map(|t| {
                *index.entry(t.clone()).or_insert_with(|| {
                    alphabet.push(t.clone());
                    alphabet.len() - 1
                })
            })
            .collect();
        let k = alphabet.len();
        Ok((Self::new(labels, k)?, alphabet))
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    /// Members of each community, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// The binary `n × K` membership matrix `Z`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.k, |i, c| {
            if self.labels[i] == c {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Per-node degree parameters θ.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeParams(pub Vec<f64>);

impl DegreeParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The `K × K` connectivity matrix `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix(pub DMatrix<f64>);

impl ConnectivityMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(ModelError::InvalidSystem("B must be square".into()));
        }
        Ok(Self(DMatrix::from_fn(k, k, |i, j| rows[i][j])))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.0[(k, l)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }
}

/// A DCSBM parametrization `(Z, Θ, B)`.
///
/// Construction checks dimensional consistency only; [`validate_system`]
/// reports the remaining model invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSystem {
    z: CommunityAssignment,
    theta: DegreeParams,
    b: ConnectivityMatrix,
}

impl ParameterSystem {
    pub fn new(
        z: CommunityAssignment,
        theta: DegreeParams,
        b: ConnectivityMatrix,
    ) -> Result<Self, ModelError> {
        if theta.len() != z.n() {
            return Err(ModelError::InvalidSystem(format!(
                "theta has length {} but there are {} nodes",
                theta.len(),
                z.n()
            )));
        }
        if b.0.nrows() != z.k() || b.0.ncols() != z.k() {
            return Err(ModelError::InvalidSystem(format!(
                "B is {}x{} but K = {}",
                b.0.nrows(),
                b.0.ncols(),
                z.k()
            )));
        }
        Ok(Self { z, theta, b })
    }

    pub fn n(&self) -> usize {
        self.z.n()
    }

    pub fn k(&self) -> usize {
        self.z.k()
    }

    pub fn z(&self) -> &CommunityAssignment {
        &self.z
    }

    pub fn theta(&self) -> &[f64] {
        self.theta.as_slice()
    }

    pub fn b(&self) -> &ConnectivityMatrix {
        &self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Full,
    #[serde(rename = "offdiag")]
    DiagonalDeleted,
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixKind::Full => f.write_str("full"),
            MatrixKind::DiagonalDeleted => f.write_str("offdiag"),
        }
    }
}

/// A dense symmetric `n × n` mean matrix Δ, either complete or with its
/// diagonal deleted.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedMatrix {
    m: DMatrix<f64>,
    kind: MatrixKind,
}

impl ExpectedMatrix {
    /// Requires a square matrix that is exactly symmetric as stored, with an
    /// exactly zero diagonal when `kind` is [`MatrixKind::DiagonalDeleted`].
    pub fn new(m: DMatrix<f64>, kind: MatrixKind) -> Result<Self, ModelError> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(ModelError::InvalidMatrix(format!(
                "matrix is {}x{}, expected square",
                n,
                m.ncols()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(ModelError::InvalidMatrix(format!(
                        "not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if kind == MatrixKind::DiagonalDeleted {
            if let Some(i) = (0..n).find(|&i| m[(i, i)] != 0.0) {
                return Err(ModelError::InvalidMatrix(format!(
                    "diagonal-deleted matrix has nonzero diagonal entry at node {}",
                    i + 1
                )));
            }
        }
        Ok(Self { m, kind })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }
}

/// Δ = ΘZBZᵀΘ, diagonal included.
pub fn expected_adjacency(sys: &ParameterSystem) -> Result<ExpectedMatrix, ModelError> {
    let n = sys.n();
    if sys.theta.len() != n || sys.b.dim() != sys.k() {
        return Err(ModelError::InvalidSystem("dimension mismatch".into()));
    }
    let theta = sys.theta();
    let z = sys.z.labels();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = theta[i] * theta[j] * sys.b.get(z[i], z[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(ExpectedMatrix {
        m,
        kind: MatrixKind::Full,
    })
}

/// Zeroes the diagonal; off-diagonal entries are copied bit for bit.
pub fn offdiag_project(delta: &ExpectedMatrix) -> ExpectedMatrix {
    let mut m = delta.m.clone();
    m.fill_diagonal(0.0);
    ExpectedMatrix {
        m,
        kind: MatrixKind::DiagonalDeleted,
    }
}

pub fn community_sizes(z: &CommunityAssignment) -> Vec<usize> {
    let mut sizes = vec![0; z.k()];
    for &l in z.labels() {
        sizes[l] += 1;
    }
    sizes
}

/// True iff every community has at least `threshold` members. A threshold
/// of 3 is the full identifiability condition; 2 is the condition for the
/// community partition alone.
pub fn check_min_size(z: &CommunityAssignment, threshold: usize) -> bool {
    community_sizes(z).iter().all(|&s| s >= threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveTheta { node: usize, value: f64 },
    AsymmetricB { row: usize, col: usize },
    RankDeficientB { smallest: f64, largest: f64 },
    EmptyCommunity { community: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveTheta { node, value } => write!(
                f,
                "degree parameter must be positive (node {}: {value})",
                node + 1
            ),
            Violation::AsymmetricB { row, col } => {
                write!(f, "B not symmetric at ({}, {})", row + 1, col + 1)
            }
            Violation::RankDeficientB { smallest, largest } => write!(
                f,
                "B rank deficient (smallest singular value {smallest:e}, largest {largest:e})"
            ),
            Violation::EmptyCommunity { community } => {
                write!(f, "community {} has no members", community + 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn reasons(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }
}

/// Checks θ positivity, symmetry and full rank of `B`, and community
/// coverage. `B` counts as full rank when its smallest singular value exceeds
/// `rank_tol` times its largest.
pub fn validate_system(sys: &ParameterSystem, rank_tol: f64) -> ValidationReport {
    let mut violations = Vec::new();
    for (node, &value) in sys.theta().iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            violations.push(Violation::NonPositiveTheta { node, value });
        }
    }
    let b = sys.b.matrix();
    let k = b.nrows();
    'sym: for r in 0..k {
        for c in (r + 1)..k {
            if b[(r, c)] != b[(c, r)] {
                violations.push(Violation::AsymmetricB { row: r, col: c });
                break 'sym;
            }
        }
    }
    let sv = linalg::singular_values(b);
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = sv.last().copied().unwrap_or(0.0);
    if !(largest > 0.0) || !(smallest > rank_tol * largest) {
        violations.push(Violation::RankDeficientB { smallest, largest });
    }
    for (community, &size) in community_sizes(&sys.z).iter().enumerate() {
        if size == 0 {
            violations.push(Violation::EmptyCommunity { community });
        }
    }
    ValidationReport { violations }
}
