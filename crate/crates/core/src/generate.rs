//! Random parameter systems and gauge transforms for property checks.

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::linalg;
use crate::model::{CommunityAssignment, ConnectivityMatrix, DegreeParams, ParameterSystem};
use crate::partitions::GaugeTransform;

/// Shape of a random system.
#[derive(Debug, Clone, Copy)]
pub struct SystemShape {
    pub n: usize,
    pub k: usize,
    /// Every community gets at least this many members.
    pub min_size: usize,
    /// θ is drawn uniformly from this range.
    pub theta_range: (f64, f64),
    /// Draw `B` with entries of both signs instead of strictly positive ones.
    pub signed_b: bool,
}

impl SystemShape {
    pub fn new(n: usize, k: usize, min_size: usize) -> Self {
        Self {
            n,
            k,
            min_size,
            theta_range: (0.5, 2.0),
            signed_b: false,
        }
    }
}

/// Labels with at least `min_size` members per community, shuffled.
pub fn random_assignment<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    min_size: usize,
) -> CommunityAssignment {
    assert!(
        k >= 1 && k * min_size.max(1) <= n,
        "shape cannot be satisfied"
    );
    let mut labels: Vec<usize> = (0..k)
        .flat_map(|c| std::iter::repeat_n(c, min_size.max(1)))
        .collect();
    while labels.len() < n {
        labels.push(rng.random_range(0..k));
    }
    labels.shuffle(rng);
    CommunityAssignment::new(labels, k).expect("every community seeded")
}

/// Symmetric `k × k` matrix with smallest singular value at least a tenth
/// of the largest. Entries are strictly positive unless `signed`.
pub fn random_connectivity<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    signed: bool,
) -> ConnectivityMatrix {
    loop {
        let mut b = DMatrix::zeros(k, k);
        for r in 0..k {
            for c in r..k {
                let v = if r == c {
                    rng.random_range(0.4..1.0)
                } else if signed {
                    rng.random_range(-0.3..0.3)
                } else {
                    rng.random_range(0.02..0.3)
                };
                b[(r, c)] = v;
                b[(c, r)] = v;
            }
        }
        let sv = linalg::singular_values(&b);
        if sv.last().copied().unwrap_or(0.0) >= 0.1 * sv[0] {
            return ConnectivityMatrix(b);
        }
    }
}

pub fn random_system<R: Rng + ?Sized>(rng: &mut R, shape: SystemShape) -> ParameterSystem {
    let z = random_assignment(rng, shape.n, shape.k, shape.min_size);
    let (lo, hi) = shape.theta_range;
    let theta = (0..shape.n).map(|_| rng.random_range(lo..hi)).collect();
    let b = random_connectivity(rng, shape.k, shape.signed_b);
    ParameterSystem::new(z, DegreeParams(theta), b).expect("consistent shape")
}

/// A system whose community `pair` has exactly two members and whose `B`
/// row for that community vanishes off the diagonal. The remaining
/// communities have at least `min_size` members.
pub fn random_isolated_pair_system<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    k: usize,
    pair: usize,
    min_size: usize,
) -> ParameterSystem {
    assert!(k >= 2 && pair < k && 2 + (k - 1) * min_size.max(1) <= n);
    let mut labels: Vec<usize> = vec![pair, pair];
    for c in (0..k).filter(|&c| c != pair) {
        labels.extend(std::iter::repeat_n(c, min_size.max(1)));
    }
    let others: Vec<usize> = (0..k).filter(|&c| c != pair).collect();
    while labels.len() < n {
        labels.push(*others.choose(rng).expect("k >= 2"));
    }
    labels.shuffle(rng);
    let z = CommunityAssignment::new(labels, k).expect("every community seeded");

    let b = loop {
        let mut b = random_connectivity(rng, k, false).0;
        for c in (0..k).filter(|&c| c != pair) {
            b[(pair, c)] = 0.0;
            b[(c, pair)] = 0.0;
        }
        let sv = linalg::singular_values(&b);
        if sv.last().copied().unwrap_or(0.0) >= 0.05 * sv[0] {
            break b;
        }
    };
    let theta = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    ParameterSystem::new(z, DegreeParams(theta), ConnectivityMatrix(b)).expect("consistent shape")
}

/// Uniform permutation and log-uniform scales in `[1/4, 4]`.
pub fn random_gauge<R: Rng + ?Sized>(rng: &mut R, k: usize) -> GaugeTransform {
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let scale = (0..k)
        .map(|_| 4f64.powf(rng.random_range(-1.0..1.0)))
        .collect();
    GaugeTransform::new(perm, scale).expect("valid by construction")
}
