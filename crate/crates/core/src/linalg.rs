//! Dense symmetric helpers shared by the model checks and the recovery
//! algorithms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenpairs of a symmetric matrix in a reproducible order.
///
/// Pairs are sorted by descending `|λ|`, ties broken by ascending `λ`. Each
/// eigenvector is flipped so its first non-negligible coordinate is positive.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> SortedEigen {
    let n = m.nrows();
    if n == 0 {
        return SortedEigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        lb.abs()
            .total_cmp(&la.abs())
            .then_with(|| la.total_cmp(&lb))
    });

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    SortedEigen { values, vectors }
}

/// Number of eigenvalues with `|λ| > rank_tol · max|λ|`.
///
/// For symmetric matrices the singular values are the absolute eigenvalues,
/// so this is the numerical rank.
pub fn numerical_rank_symmetric(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    let eig = sorted_symmetric_eigen(m);
    count_above(eig.values.as_slice(), rank_tol)
}

pub(crate) fn count_above(sorted_by_abs_desc: &[f64], rank_tol: f64) -> usize {
    let Some(top) = sorted_by_abs_desc.first().map(|x| x.abs()) else {
        return 0;
    };
    if top == 0.0 {
        return 0;
    }
    sorted_by_abs_desc
        .iter()
        .take_while(|x| x.abs() > rank_tol * top)
        .count()
}

/// Singular values of a general matrix, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Best rank-`k` symmetric approximation by largest-magnitude eigen-truncation.
pub fn truncate_rank(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let eig = sorted_symmetric_eigen(m);
    let k = k.min(m.nrows());
    let u = eig.vectors.columns(0, k);
    let lambda = DMatrix::from_diagonal(&eig.values.rows(0, k).into_owned());
    let mut y = u * lambda * u.transpose();
    symmetrize(&mut y);
    y
}

/// Replace `m` by `(m + mᵀ)/2` so later comparisons see exact symmetry.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
