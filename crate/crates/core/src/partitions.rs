//! Partitions of node indices induced by row equivalence and row
//! proportional equivalence, and the permutation/scaling gauge.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::CommunityAssignment;

/// Default relative tolerance for partition operations.
pub const DEFAULT_PARTITION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("row {} has norm {norm:e}, at or below tolerance", .row + 1)]
    ZeroRow { row: usize, norm: f64 },
    #[error("assignments induce different partitions")]
    NotPermutable,
    #[error("invalid partition: {0}")]
    Invalid(String),
    #[error("invalid gauge transform: {0}")]
    InvalidTransform(String),
}

/// Disjoint nonempty blocks covering `0..n`, each block ascending and blocks
/// ordered by their minimum element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Accepts blocks in any order and canonicalizes them.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self, PartitionError> {
        let mut seen = vec![false; n];
        let mut blocks = blocks;
        for block in &mut blocks {
            if block.is_empty() {
                return Err(PartitionError::Invalid("empty block".into()));
            }
            block.sort_unstable();
            for &i in block.iter() {
                if i >= n {
                    return Err(PartitionError::Invalid(format!(
                        "index {} out of range",
                        i + 1
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(PartitionError::Invalid(format!("index {} repeated", i + 1)));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(PartitionError::Invalid(format!(
                "index {} not covered",
                missing + 1
            )));
        }
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    pub fn from_assignment(z: &CommunityAssignment) -> Self {
        let mut blocks = z.members();
        blocks.sort_by_key(|b| b[0]);
        Self { n: z.n(), blocks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block index of every node.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                out[i] = b;
            }
        }
        out
    }

    fn from_union_find(mut uf: UnionFind) -> Self {
        let n = uf.parent.len();
        let mut root_block: Vec<Option<usize>> = vec![None; n];
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        // Ascending node order makes blocks come out sorted by minimum element.
        for i in 0..n {
            let r = uf.find(i);
            match root_block[r] {
                Some(b) => blocks[b].push(i),
                None => {
                    root_block[r] = Some(blocks.len());
                    blocks.push(vec![i]);
                }
            }
        }
        Self { n, blocks }
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Closes the relation `related(i, j)` (queried for `i < j`) under
/// transitivity.
pub(crate) fn closure(n: usize, mut related: impl FnMut(usize, usize) -> bool) -> Partition {
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if related(i, j) {
                uf.union(i, j);
            }
        }
    }
    Partition::from_union_find(uf)
}

/// Groups rows that agree entrywise: rows `i` and `j` are related when
/// `max_m |M[i,m] − M[j,m]| ≤ tol · (1 + max(|row i|∞, |row j|∞))`.
pub fn row_equivalence_partition(m: &DMatrix<f64>, tol: f64) -> Partition {
    let mags: Vec<f64> = m.row_iter().map(|r| r.amax()).collect();
    closure(m.nrows(), |i, j| {
        let diff = (m.row(i) - m.row(j)).amax();
        diff <= tol * (1.0 + mags[i].max(mags[j]))
    })
}

/// Groups rows that are positive multiples of each other.
///
/// Each row is divided by its largest absolute entry; rows are related when
/// the scaled rows agree entrywise within `tol`. The max-abs scaling keeps
/// the comparison exact for exactly representable proportional rows at
/// `tol = 0`. Also returns each row's Euclidean norm, so that within a
/// block `ratios[i] / ratios[j]` is the proportionality factor between rows
/// `i` and `j`.
pub fn row_proportional_partition(
    m: &DMatrix<f64>,
    tol: f64,
) -> Result<(Partition, Vec<f64>), PartitionError> {
    let norms: Vec<f64> = m.row_iter().map(|r| r.norm()).collect();
    if let Some((row, &norm)) = norms.iter().enumerate().find(|(_, &nrm)| !(nrm > tol)) {
        return Err(PartitionError::ZeroRow { row, norm });
    }
    let unit: Vec<_> = m.row_iter().map(|r| r / r.amax()).collect();
    let partition = closure(m.nrows(), |i, j| (&unit[i] - &unit[j]).amax() <= tol);
    Ok((partition, norms))
}

/// Returns `π` with `z2[i] = π(z1[i])` for every node, if the two
/// assignments induce the same partition.
pub fn permutation_between(
    z1: &CommunityAssignment,
    z2: &CommunityAssignment,
) -> Result<Vec<usize>, PartitionError> {
    if z1.n() != z2.n() || z1.k() != z2.k() {
        return Err(PartitionError::NotPermutable);
    }
    let k = z1.k();
    let mut perm: Vec<Option<usize>> = vec![None; k];
    let mut used = vec![false; k];
    for (&a, &b) in z1.labels().iter().zip(z2.labels()) {
        match perm[a] {
            Some(existing) if existing != b => return Err(PartitionError::NotPermutable),
            Some(_) => {}
            None => {
                if std::mem::replace(&mut used[b], true) {
                    return Err(PartitionError::NotPermutable);
                }
                perm[a] = Some(b);
            }
        }
    }
    // Every community is nonempty, so every slot was filled.
    Ok(perm
        .into_iter()
        .map(|p| p.expect("nonempty community"))
        .collect())
}

/// Labels community `k` with the `k`-th block in canonical order.
pub fn membership_from_partition(p: &Partition) -> CommunityAssignment {
    CommunityAssignment::new(p.block_of(), p.len()).expect("partition blocks are nonempty")
}

/// The gauge `(P, D)`: community `k` is relabeled `perm[k]` and rescaled by
/// `scale[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransform {
    perm: Vec<usize>,
    scale: Vec<f64>,
}

impl GaugeTransform {
    pub fn new(perm: Vec<usize>, scale: Vec<f64>) -> Result<Self, PartitionError> {
        let k = perm.len();
        if scale.len() != k {
            return Err(PartitionError::InvalidTransform(format!(
                "perm has {k} entries but scale has {}",
                scale.len()
            )));
        }
        let mut hit = vec![false; k];
        for &p in &perm {
            if p >= k || std::mem::replace(&mut hit[p], true) {
                return Err(PartitionError::InvalidTransform(
                    "perm is not a bijection".into(),
                ));
            }
        }
        if let Some(s) = scale.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(PartitionError::InvalidTransform(format!(
                "scale {s} is not strictly positive"
            )));
        }
        Ok(Self { perm, scale })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            perm: (0..k).collect(),
            scale: vec![1.0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(k, &p)| k == p) && self.scale.iter().all(|&s| s == 1.0)
    }

    /// The transform equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &GaugeTransform) -> GaugeTransform {
        let perm = self.perm.iter().map(|&p| next.perm[p]).collect();
        let scale = self
            .perm
            .iter()
            .zip(&self.scale)
            .map(|(&p, &s)| s * next.scale[p])
            .collect();
        GaugeTransform { perm, scale }
    }

    pub fn inverse(&self) -> GaugeTransform {
        let k = self.k();
        let mut perm = vec![0; k];
        let mut scale = vec![0.0; k];
        for (src, &dst) in self.perm.iter().enumerate() {
            perm[dst] = src;
            scale[dst] = 1.0 / self.scale[src];
        }
        GaugeTransform { perm, scale }
    }

    /// The `K × K` permutation matrix `P` with `P[k, π(k)] = 1`.
    pub fn permutation_matrix(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |r, c| if self.perm[r] == c { 1.0 } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(p: &Partition) -> Vec<Vec<usize>> {
        p.blocks()
            .iter()
            .map(|b| b.iter().map(|i| i + 1).collect())
            .collect()
    }

    #[test]
    fn example1_membership_rows() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let p = row_equivalence_partition(&z, 0.0);
        assert_eq!(blocks(&p), vec![vec![1], vec![2, 3]]);
    }

    #[test]
    fn identical_rows_form_one_block() {
        let m = DMatrix::from_fn(5, 3, |_, c| c as f64 + 0.5);
        assert_eq!(row_equivalence_partition(&m, 0.0).len(), 1);
    }

    #[test]
    fn proportional_rows() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 1.0]);
        let (p, ratios) = row_proportional_partition(&m, 0.0).unwrap();
        assert_eq!(blocks(&p), vec![vec![1, 2], vec![3]]);
        assert!((ratios[1] / ratios[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn negative_factor_is_not_proportional() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let (p, _) = row_proportional_partition(&m, 1e-9).unwrap();
        assert_eq!(blocks(&p), vec![vec![1], vec![2]]);
    }

    #[test]
    fn zero_row_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            row_proportional_partition(&m, 1e-9),
            Err(PartitionError::ZeroRow { row: 1, .. })
        ));
    }

    #[test]
    fn permutations() {
        let z1 = CommunityAssignment::from_one_based(&[1, 2, 2], 2).unwrap();
        let z2 = CommunityAssignment::from_one_based(&[2, 1, 1], 2).unwrap();
        assert_eq!(permutation_between(&z1, &z2).unwrap(), vec![1, 0]);
        assert_eq!(permutation_between(&z1, &z1).unwrap(), vec![0, 1]);
        let z3 = CommunityAssignment::from_one_based(&[1, 1, 2], 2).unwrap();
        assert_eq!(
            permutation_between(&z1, &z3),
            Err(PartitionError::NotPermutable)
        );
    }

    #[test]
    fn canonical_labels_from_partition() {
        let p = Partition::new(3, vec![vec![1, 2], vec![0]]).unwrap();
        assert_eq!(membership_from_partition(&p).to_one_based(), vec![1, 2, 2]);
        let all = Partition::new(4, vec![vec![3, 2, 1, 0]]).unwrap();
        assert_eq!(membership_from_partition(&all).to_one_based(), vec![1; 4]);
    }

    #[test]
    fn partition_constructor_rejects_bad_blocks() {
        assert!(Partition::new(3, vec![vec![0, 1]]).is_err());
        assert!(Partition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::new(2, vec![vec![0, 1], vec![]]).is_err());
        assert!(Partition::new(2, vec![vec![0, 2]]).is_err());
    }

    #[test]
    fn gauge_composition_and_inverse() {
        let g = GaugeTransform::new(vec![2, 0, 1], vec![2.0, 0.5, 3.0]).unwrap();
        let id = g.then(&g.inverse());
        assert_eq!(id.perm(), &[0, 1, 2]);
        for s in id.scale() {
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert!(GaugeTransform::new(vec![0, 0], vec![1.0, 1.0]).is_err());
        assert!(GaugeTransform::new(vec![0, 1], vec![1.0, 0.0]).is_err());
        assert!(GaugeTransform::identity(3).is_identity());
    }

    #[test]
    fn union_find_closes_chains() {
        // 0~1 and 1~2 only; the closure must merge all three.
        let p = closure(4, |i, j| j == i + 1 && j < 3);
        assert_eq!(blocks(&p), vec![vec![1, 2, 3], vec![4]]);
    }
}
