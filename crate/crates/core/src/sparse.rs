//! Thin wrapper over faer's sparse matrices and sparse LU.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LuError;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat, Triplet};
use faer::MatMut;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-column storage.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    mat: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let triplets: Vec<_> = entries
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let mat = SparseColMat::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Factorization {
                what: "sparse matrix assembly".into(),
                reason: format!("{e:?}"),
            })?;
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.mat.compute_nnz()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let m = self.mat.as_ref();
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (&i, &v) in m.row_idx_of_col_raw(j).iter().zip(m.val_of_col(j)) {
                y[i] += v * xj;
            }
        }
    }

    /// `(row, col, value)` of every stored entry, column by column.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let m = self.mat.as_ref();
        (0..self.dim())
            .flat_map(|j| {
                m.row_idx_of_col_raw(j)
                    .iter()
                    .zip(m.val_of_col(j))
                    .map(move |(&i, &v)| (i, j, v))
            })
            .collect()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let m = self.mat.as_ref();
        m.row_idx_of_col_raw(col)
            .iter()
            .zip(m.val_of_col(col))
            .filter(|(&i, _)| i == row)
            .map(|(_, &v)| v)
            .sum()
    }

    pub fn factorize(&self, what: &str) -> Result<LuFactor> {
        let lu = self.mat.sp_lu().map_err(|e| lu_error(what, e))?;
        Ok(LuFactor {
            lu,
            n: self.dim(),
            what: what.to_string(),
        })
    }
}

fn lu_error(what: &str, e: LuError) -> Error {
    let reason = match e {
        LuError::SymbolicSingular { index } => format!("structurally singular at pivot {index}"),
        LuError::Generic(e) => format!("{e:?}"),
    };
    Error::Factorization {
        what: what.to_string(),
        reason,
    }
}

/// A sparse LU factorization that can be applied to any number of
/// right-hand sides, concurrently.
pub struct LuFactor {
    lu: Lu<usize, f64>,
    n: usize,
    what: String,
}

impl LuFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let n = self.n;
        self.lu
            .solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization {
                what: self.what.clone(),
                reason: "numerically singular (non-finite solution)".into(),
            });
        }
        Ok(())
    }
}

impl std::fmt::Debug for LuFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactor")
            .field("n", &self.n)
            .field("what", &self.what)
            .finish()
    }
}

/// Fixed sparsity pattern whose symbolic analysis is shared by repeated
/// numeric factorizations (Newton Jacobians).
pub struct FixedPattern {
    n: usize,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    symbolic_lu: SymbolicLu<usize>,
}

impl FixedPattern {
    /// `index` lists `(row, col)` in the order values will later be supplied.
    pub fn new(n: usize, index: &[(usize, usize)], what: &str) -> Result<Self> {
        let pairs: Vec<_> = index.iter().map(|&(i, j)| Pair::new(i, j)).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| Error::Factorization {
                what: what.to_string(),
                reason: format!("{e:?}"),
            })?;
        let symbolic_lu = SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| Error::Factorization {
            what: what.to_string(),
            reason: format!("{e:?}"),
        })?;
        Ok(Self {
            n,
            symbolic,
            argsort,
            symbolic_lu,
        })
    }

    pub fn factorize(&self, values: &[f64], what: &str) -> Result<LuFactor> {
        let mat = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, values)
            .map_err(|e| Error::Factorization {
                what: what.to_string(),
                reason: format!("{e:?}"),
            })?;
        let lu = Lu::try_new_with_symbolic(
            self.symbolic_lu.clone(),
            mat.as_ref(),
        )
        .map_err(|e| lu_error(what, e))?;
        Ok(LuFactor {
            lu,
            n: self.n,
            what: what.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -2.0));
            }
        }
        t
    }

    #[test]
    fn solve_round_trip() {
        let a = SparseMatrix::from_triplets(50, &tridiag(50)).unwrap();
        let w: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = a.mul_vec(&w);
        a.factorize("test").unwrap().solve_in_place(&mut b).unwrap();
        for (x, y) in b.iter().zip(&w) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn fixed_pattern_matches_direct() {
        let t = tridiag(20);
        let index: Vec<_> = t.iter().map(|&(i, j, _)| (i, j)).collect();
        let pattern = FixedPattern::new(20, &index, "test").unwrap();
        let values: Vec<f64> = t.iter().map(|e| e.2).collect();
        let lu = pattern.factorize(&values, "test").unwrap();
        let mut x = vec![1.0; 20];
        lu.solve_in_place(&mut x).unwrap();
        let a = SparseMatrix::from_triplets(20, &t).unwrap();
        let r = a.mul_vec(&x);
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn wrong_length_rejected() {
        let a = SparseMatrix::from_triplets(3, &tridiag(3)).unwrap();
        let lu = a.factorize("test").unwrap();
        assert!(matches!(
            lu.solve_in_place(&mut [1.0; 4]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
