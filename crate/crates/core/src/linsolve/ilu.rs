use alloc::vec::Vec;

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Incomplete LU factorization with the sparsity pattern of the matrix
/// itself: unit lower factor below the diagonal, upper factor on and above.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::param("ILU needs a square matrix"));
        }
        let row_ptr = a.pattern().row_ptr().to_vec();
        let col_idx = a.pattern().col_idx().to_vec();
        let mut values = a.values().to_vec();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            match cols.binary_search(&i) {
                Ok(k) => diag.push(row_ptr[i] + k),
                Err(_) => return Err(Error::Singular(i)),
            }
        }

        // Position of each column in the current row, or usize::MAX.
        let mut marker = alloc::vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            for p in lo..hi {
                marker[col_idx[p]] = p;
            }
            for p in lo..diag[i] {
                let k = col_idx[p];
                let pivot = values[diag[k]];
                let l = values[p] / pivot;
                values[p] = l;
                for q in diag[k] + 1..row_ptr[k + 1] {
                    let m = marker[col_idx[q]];
                    if m != usize::MAX {
                        values[m] -= l * values[q];
                    }
                }
            }
            let d = values[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Singular(i));
            }
            for p in lo..hi {
                marker[col_idx[p]] = usize::MAX;
            }
        }
        Ok(Ilu0 {
            row_ptr,
            col_idx,
            values,
            diag,
        })
    }

    /// `z = (LU)^{-1} r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = r[i];
            for p in self.row_ptr[i]..self.diag[i] {
                s -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = s / self.values[self.diag[i]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::{lu_solve, DenseMatrix};
    use alloc::vec;

    #[test]
    fn exact_on_tridiagonal() {
        // No fill-in, so ILU(0) is the exact LU factorization.
        let n = 12;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0 + i as f64 * 0.1));
            if i > 0 {
                trip.push((i, i - 1, -1.0 - 0.05 * i as f64));
            }
            if i + 1 < n {
                trip.push((i, i + 1, -0.7));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let ilu = Ilu0::new(&a).unwrap();
        let mut z = vec![0.0; n];
        ilu.apply(&b, &mut z);
        let dense = DenseMatrix::from_rows(&a.to_dense()).unwrap();
        let x = lu_solve(dense, &b).unwrap();
        for (p, q) in z.iter().zip(&x) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn missing_or_zero_pivot_is_singular() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(Ilu0::new(&a), Err(Error::Singular(0))));
    }
}
