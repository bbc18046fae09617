//! The permutation-and-scaling gauge acting on parameter systems: applying a
//! transform, picking a canonical representative of each orbit, and
//! comparing systems either exactly (same full Δ) or through their
//! off-diagonal part only.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::model::{
    expected_adjacency, CommunityAssignment, ConnectivityMatrix, DegreeParams, ParameterSystem,
};
use crate::partitions::{GaugeTransform, PartitionError};

/// Default tolerance for comparing canonical forms.
pub const DEFAULT_EQUIV_TOL: f64 = 1e-8;

/// `|a − b| ≤ tol · (1 + max(|a|, |b|))`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Maps `(Z, Θ, B)` to `(ZP, Θ·diag(ZD⁻¹1), PᵀDBDP)`.
///
/// Community `k` becomes `perm[k]`, node `i` has θ divided by the scale of
/// its community, and `B[perm k][perm l] = D_k · B[k][l] · D_l`.
pub fn apply_transform(
    sys: &ParameterSystem,
    g: &GaugeTransform,
) -> Result<ParameterSystem, PartitionError> {
    let k = sys.k();
    if g.k() != k {
        return Err(PartitionError::InvalidTransform(format!(
            "transform acts on {} communities, system has {k}",
            g.k()
        )));
    }
    let perm = g.perm();
    let scale = g.scale();

    let labels = sys.z().labels().iter().map(|&l| perm[l]).collect();
    let theta = sys
        .z()
        .labels()
        .iter()
        .zip(sys.theta())
        .map(|(&l, &t)| t / scale[l])
        .collect();

    let b = sys.b();
    let mut nb = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in r..k {
            let v = scale[r] * b.get(r, c) * scale[c];
            nb[(perm[r], perm[c])] = v;
            nb[(perm[c], perm[r])] = v;
        }
    }

    let z = CommunityAssignment::new(labels, k).expect("relabeling preserves coverage");
    Ok(
        ParameterSystem::new(z, DegreeParams(theta), ConnectivityMatrix(nb))
            .expect("dimensions unchanged"),
    )
}

/// The orbit representative: communities numbered by ascending minimum
/// member, and θ = 1 at each community's minimum member.
///
/// Returns the canonical system together with the transform that produces
/// it from `sys`.
pub fn canonicalize(sys: &ParameterSystem) -> (ParameterSystem, GaugeTransform) {
    let k = sys.k();
    let mut first_member = vec![usize::MAX; k];
    for (i, &l) in sys.z().labels().iter().enumerate() {
        if first_member[l] == usize::MAX {
            first_member[l] = i;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| first_member[c]);
    let mut perm = vec![0; k];
    for (rank, &c) in order.iter().enumerate() {
        perm[c] = rank;
    }
    let scale = first_member.iter().map(|&i| sys.theta()[i]).collect();
    let g = GaugeTransform::new(perm, scale).expect("valid system has positive theta");
    let canon = apply_transform(sys, &g).expect("transform built for this system");
    (canon, g)
}

/// Which component first differs between two canonical forms.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Mismatch {
    NodeCount {
        left: usize,
        right: usize,
    },
    CommunityCount {
        left: usize,
        right: usize,
    },
    Partition,
    Theta {
        node: usize,
        left: f64,
        right: f64,
    },
    #[serde(rename = "B")]
    B {
        row: usize,
        col: usize,
        left: f64,
        right: f64,
    },
}

impl Mismatch {
    pub fn reason(&self) -> &'static str {
        match self {
            Mismatch::NodeCount { .. } => "node_count",
            Mismatch::CommunityCount { .. } => "community_count",
            Mismatch::Partition => "partition",
            Mismatch::Theta { .. } => "theta",
            Mismatch::B { .. } => "B",
        }
    }
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mismatch::NodeCount { left, right } => {
                write!(f, "node counts differ ({left} vs {right})")
            }
            Mismatch::CommunityCount { left, right } => {
                write!(f, "community counts differ ({left} vs {right})")
            }
            Mismatch::Partition => f.write_str("community partitions differ"),
            Mismatch::Theta { node, left, right } => write!(
                f,
                "canonical degree parameters differ at node {} ({left} vs {right})",
                node + 1
            ),
            Mismatch::B {
                row,
                col,
                left,
                right,
            } => write!(
                f,
                "canonical B differs at ({}, {}) ({left} vs {right})",
                row + 1,
                col + 1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Equivalence {
    /// `apply_transform(sys1, witness) ≈ sys2`.
    Equivalent(GaugeTransform),
    NotEquivalent(Mismatch),
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent(_))
    }
}

/// Decides whether two systems lie in the same gauge orbit by comparing
/// canonical forms entrywise with [`approx_eq`].
pub fn equivalent(sys1: &ParameterSystem, sys2: &ParameterSystem, tol: f64) -> Equivalence {
    if sys1.n() != sys2.n() {
        return Equivalence::NotEquivalent(Mismatch::NodeCount {
            left: sys1.n(),
            right: sys2.n(),
        });
    }
    if sys1.k() != sys2.k() {
        return Equivalence::NotEquivalent(Mismatch::CommunityCount {
            left: sys1.k(),
            right: sys2.k(),
        });
    }
    let (c1, g1) = canonicalize(sys1);
    let (c2, g2) = canonicalize(sys2);
    if c1.z() != c2.z() {
        return Equivalence::NotEquivalent(Mismatch::Partition);
    }
    for (node, (&a, &b)) in c1.theta().iter().zip(c2.theta()).enumerate() {
        if !approx_eq(a, b, tol) {
            return Equivalence::NotEquivalent(Mismatch::Theta {
                node,
                left: a,
                right: b,
            });
        }
    }
    let k = sys1.k();
    for row in 0..k {
        for col in 0..k {
            let (a, b) = (c1.b().get(row, col), c2.b().get(row, col));
            if !approx_eq(a, b, tol) {
                return Equivalence::NotEquivalent(Mismatch::B {
                    row,
                    col,
                    left: a,
                    right: b,
                });
            }
        }
    }
    Equivalence::Equivalent(g1.then(&g2.inverse()))
}

/// True iff both systems produce the same off-diagonal expected matrix,
/// entrywise within [`approx_eq`] at `tol`.
pub fn same_model_offdiag(sys1: &ParameterSystem, sys2: &ParameterSystem, tol: f64) -> bool {
    if sys1.n() != sys2.n() {
        return false;
    }
    let (Ok(d1), Ok(d2)) = (expected_adjacency(sys1), expected_adjacency(sys2)) else {
        return false;
    };
    let n = sys1.n();
    (0..n).all(|i| {
        (0..n)
            .filter(|&j| j != i)
            .all(|j| approx_eq(d1.get(i, j), d2.get(i, j), tol))
    })
}
