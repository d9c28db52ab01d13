//! Eigendecomposition of real symmetric matrices that exploits exact block
//! structure: indices are grouped into connected components of the nonzero
//! pattern and each component is diagonalized on its own.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues in `[-CLAMP_TOLERANCE, 0)` are treated as zero; anything more
/// negative is rejected.
pub const CLAMP_TOLERANCE: f64 = 1e-10;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the joint nonzero pattern of `matrices`, each
/// component listed in increasing index order; components are ordered by
/// their smallest index.
pub fn components<T: Real>(matrices: &[&DMatrix<T>]) -> Vec<Vec<usize>> {
    let n = matrices.first().map_or(0, |m| m.nrows());
    let mut uf = UnionFind::new(n);
    for m in matrices {
        for j in 0..n {
            let col = m.column(j);
            for i in (j + 1)..n {
                if col[i] != T::zero() {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = out.len();
            out.push(Vec::new());
        }
        out[slot[r]].push(i);
    }
    out
}

pub(crate) fn submatrix<T: Real>(m: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Eigen-pairs of one diagonal block.
#[derive(Debug, Clone)]
pub struct BlockEigen<T: Real> {
    pub indices: Vec<usize>,
    pub values: DVector<T>,
    /// Columns are eigenvectors expressed on `indices`.
    pub vectors: DMatrix<T>,
}

/// Clamps tiny negative eigenvalues to zero and rejects larger ones.
pub(crate) fn clamp_spectrum<T: Real>(values: &mut DVector<T>, tol: f64) -> Result<()> {
    let tol = T::lit(tol);
    for v in values.iter_mut() {
        if !v.is_finite() {
            return Err(Error::NonFinite("eigenvalue".into()));
        }
        if *v < T::zero() {
            if *v < -tol {
                return Err(Error::NumericalIntegrity(format!(
                    "negative eigenvalue {:e}",
                    v.as_f64()
                )));
            }
            log::debug!("clamping eigenvalue {:e} to zero", v.as_f64());
            *v = T::zero();
        }
    }
    Ok(())
}

pub(crate) fn eigen_block<T: Real>(m: &DMatrix<T>, idx: &[usize]) -> (DVector<T>, DMatrix<T>) {
    if idx.len() == 1 {
        let v = m[(idx[0], idx[0])];
        return (DVector::from_element(1, v), DMatrix::identity(1, 1));
    }
    let sub = submatrix(m, idx);
    let eig = SymmetricEigen::new(sub);
    (eig.eigenvalues, eig.eigenvectors)
}

/// Block-wise spectral decomposition of a symmetric matrix.
pub fn block_eigen<T: Real>(m: &DMatrix<T>) -> Vec<BlockEigen<T>> {
    components(&[m])
        .into_iter()
        .map(|indices| {
            let (values, vectors) = eigen_block(m, &indices);
            BlockEigen {
                indices,
                values,
                vectors,
            }
        })
        .collect()
}

/// All eigenvalues of a symmetric matrix (unordered across blocks).
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    block_eigen(m)
        .into_iter()
        .flat_map(|b| b.values.iter().copied().collect::<Vec<_>>())
        .collect()
}

/// Eigenvalues clamped per [`CLAMP_TOLERANCE`].
pub fn psd_eigenvalues<T: Real>(m: &DMatrix<T>) -> Result<Vec<T>> {
    let mut v = DVector::from_vec(eigenvalues(m));
    clamp_spectrum(&mut v, CLAMP_TOLERANCE)?;
    Ok(v.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_eigenvalues_match_dense() {
        // two interleaved blocks {0, 2} and {1, 3}, plus an isolated index 4
        let m = DMatrix::from_row_slice(
            5,
            5,
            &[
                2.0, 0.0, 1.0, 0.0, 0.0, //
                0.0, 3.0, 0.0, 0.5, 0.0, //
                1.0, 0.0, 2.0, 0.0, 0.0, //
                0.0, 0.5, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, 7.0,
            ],
        );
        let comps = components(&[&m]);
        assert_eq!(comps, vec![vec![0, 2], vec![1, 3], vec![4]]);
        let mut blocked = eigenvalues(&m);
        let mut dense: Vec<f64> = SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        blocked.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dense.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in blocked.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_components_merge_patterns() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(components(&[&a, &b]), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn clamps_and_rejects() {
        let mut v = DVector::from_vec(vec![0.5, -1e-12, 0.5]);
        clamp_spectrum(&mut v, CLAMP_TOLERANCE).unwrap();
        assert_eq!(v[1], 0.0);
        let mut w = DVector::from_vec(vec![0.5, -1e-6]);
        assert!(matches!(
            clamp_spectrum(&mut w, CLAMP_TOLERANCE),
            Err(Error::NumericalIntegrity(_))
        ));
    }
}
