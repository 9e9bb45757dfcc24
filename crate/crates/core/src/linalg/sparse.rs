use crate::linalg::Matrix;
use crate::scalar::Real;

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Clone, Debug)]
pub struct TripletBuilder<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix<T> {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r).find(|&(col, _)| col == c).map_or(T::zero(), |(_, v)| v)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).fold(T::zero(), |acc, (c, v)| acc + v * x[c]);
        }
    }

    /// `selfᵀ x`
    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::zero(); self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                b.push(c, r, v);
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// `selfᵀ self` for a sparse `self`, assembled column-pair-wise through
    /// the shared rows.
    pub fn gram(&self) -> Self {
        let mut b = TripletBuilder::new(self.ncols, self.ncols);
        for r in 0..self.nrows {
            for (ci, vi) in self.row(r) {
                for (cj, vj) in self.row(r) {
                    b.push(ci, cj, vi * vj);
                }
            }
        }
        b.build()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    /// `alpha * I + beta * self` for a square matrix.
    pub fn shifted(&self, alpha: T, beta: T) -> Self {
        assert_eq!(self.nrows, self.ncols);
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for r in 0..self.nrows {
            b.push(r, r, alpha);
            for (c, v) in self.row(r) {
                b.push(r, c, beta * v);
            }
        }
        b.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut b = TripletBuilder::new(2, 3);
        b.push(1, 2, 1.5);
        b.push(0, 0, 1.0);
        b.push(1, 2, 0.5);
        let m = b.build();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 2.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![1.0, 2.0]);
        assert_eq!(m.tr_matvec(&[1.0, 1.0]), vec![1.0, 0.0, 2.0]);
    }

    #[test]
    fn gram_matches_dense() {
        let mut b = TripletBuilder::new(3, 2);
        b.push(0, 0, 1.0);
        b.push(1, 0, -1.0);
        b.push(1, 1, 2.0);
        b.push(2, 1, 3.0);
        let m = b.build();
        let d = m.to_dense();
        assert_eq!(m.gram().to_dense(), d.tr_matmul(&d));
    }
}
