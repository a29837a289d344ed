use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row offsets and sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CsrPattern {
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1
            || row_ptr[0] != 0
            || *row_ptr.last().unwrap() != col_idx.len()
        {
            return Err(Error::param("inconsistent CSR row offsets"));
        }
        for i in 0..nrows {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if row_ptr[i] > row_ptr[i + 1] || cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(
                    "CSR columns must be strictly increasing per row",
                ));
            }
            if cols.last().is_some_and(|&c| c >= ncols) {
                return Err(Error::param("CSR column index out of range"));
            }
        }
        Ok(CsrPattern {
            nrows,
            ncols,
            row_ptr,
            col_idx,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.col_idx[start..self.row_ptr[i + 1]]
            .binary_search(&j)
            .ok()
            .map(|k| start + k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = alloc::vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn from_parts(pattern: Arc<CsrPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch {
                expected: pattern.nnz(),
                found: values.len(),
            });
        }
        Ok(CsrMatrix { pattern, values })
    }

    /// Sums duplicate entries.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if sorted.iter().any(|&(i, j, _)| i >= nrows || j >= ncols) {
            return Err(Error::param("triplet index out of range"));
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = alloc::vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let pattern = CsrPattern::new(nrows, ncols, row_ptr, col_idx)?;
        Ok(CsrMatrix {
            pattern: Arc::new(pattern),
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        let pattern = CsrPattern {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
        };
        CsrMatrix {
            pattern: Arc::new(pattern),
            values: alloc::vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, m, &triplets).expect("dense rows are well formed")
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        self.pattern.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows().min(self.ncols()))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = alloc::vec![alloc::vec![0.0; self.ncols()]; self.nrows()];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows() != self.ncols() {
            return false;
        }
        (0..self.nrows()).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = alloc::vec![0.0; self.nrows()];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.ncols(),
                found: x.len(),
            });
        }
        if y.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows(),
                found: y.len(),
            });
        }
        self.spmv_unchecked(x, y);
        Ok(())
    }

    #[inline]
    pub(crate) fn spmv_unchecked(&self, x: &[f64], y: &mut [f64]) {
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in rp[i]..rp[i + 1] {
                acc += self.values[k] * x[ci[k]];
            }
            *yi = acc;
        }
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let y = self.spmv(x)?;
        Ok(super::dot(x, &y))
    }

    /// Overwrites `self` with `sum coef * term`. All terms must share the
    /// pattern of `self`.
    pub fn assign_combination(&mut self, terms: &[(f64, &CsrMatrix)]) -> Result<()> {
        for (_, t) in terms {
            if !same_pattern(&self.pattern, &t.pattern) {
                return Err(Error::param(
                    "matrix combination needs a shared sparsity pattern",
                ));
            }
        }
        for (k, v) in self.values.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, t) in terms {
                acc += c * t.values[k];
            }
            *v = acc;
        }
        Ok(())
    }
}

fn same_pattern(a: &Arc<CsrPattern>, b: &Arc<CsrPattern>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub fn spmv(a: &CsrMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.spmv(x)
}

/// Linear combination `sum coef * matrix` on the union sparsity pattern.
pub fn add_scaled(terms: &[(f64, &CsrMatrix)]) -> Result<CsrMatrix> {
    let (_, first) = *terms
        .first()
        .ok_or_else(|| Error::param("add_scaled needs at least one term"))?;
    let (nrows, ncols) = (first.nrows(), first.ncols());
    for (_, t) in terms {
        if t.nrows() != nrows || t.ncols() != ncols {
            return Err(Error::DimensionMismatch {
                expected: nrows * ncols,
                found: t.nrows() * t.ncols(),
            });
        }
    }
    if terms
        .iter()
        .all(|(_, t)| same_pattern(&first.pattern, &t.pattern))
    {
        let mut out = CsrMatrix::zeros(first.pattern.clone());
        out.assign_combination(terms)?;
        return Ok(out);
    }

    let mut row_ptr = Vec::with_capacity(nrows + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    let mut cols: Vec<usize> = Vec::new();
    for i in 0..nrows {
        cols.clear();
        for (_, t) in terms {
            cols.extend(t.row(i).map(|(j, _)| j));
        }
        cols.sort_unstable();
        cols.dedup();
        let base = values.len();
        col_idx.extend_from_slice(&cols);
        values.resize(base + cols.len(), 0.0);
        for (c, t) in terms {
            for (j, v) in t.row(i) {
                let k = cols.binary_search(&j).unwrap();
                values[base + k] += c * v;
            }
        }
        row_ptr.push(col_idx.len());
    }
    let pattern = CsrPattern::new(nrows, ncols, row_ptr, col_idx)?;
    Ok(CsrMatrix {
        pattern: Arc::new(pattern),
        values,
    })
}
