//! Minimal compressed-row sparse matrix used for logistic-regression data.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from raw parts. Column indices must be strictly increasing within a row.
    pub fn new(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1 || indptr[0] != 0 || *indptr.last().unwrap() != indices.len() {
            return Err(Error::data("malformed row pointer array"));
        }
        if indices.len() != values.len() {
            return Err(Error::data("index and value arrays differ in length"));
        }
        for r in 0..nrows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(Error::data("row pointers must be nondecreasing"));
            }
            let row = &indices[lo..hi];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c >= ncols) {
                return Err(Error::data(format!("row {r} has unsorted or out-of-range columns")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite matrix entry"));
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows: m.nrows(), ncols: m.ncols(), indptr, indices, values }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_dot(&self, r: usize, x: &DVector<f64>) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    pub fn row_norm_squared(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v * v).sum()
    }

    /// Scale every entry of row `r` by `factor`.
    pub fn scale_row(&mut self, r: usize, factor: f64) {
        for v in &mut self.values[self.indptr[r]..self.indptr[r + 1]] {
            *v *= factor;
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.nrows, (0..self.nrows).map(|r| self.row_dot(r, x)))
    }

    /// `self^T u`
    pub fn tr_mul_vec(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for r in 0..self.nrows {
            let ur = u[r];
            if ur != 0.0 {
                for (c, v) in self.row(r) {
                    out[c] += ur * v;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }
}
