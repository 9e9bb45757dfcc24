use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Dense column-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(nrows: usize, columns: &[Vec<T>]) -> Result<Self> {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            if c.len() != nrows {
                return Err(Error::dims("matrix column", nrows, c.len()));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            nrows,
            ncols: columns.len(),
            data,
        })
    }

    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::dims("matrix data", nrows * ncols, data.len()));
        }
        Ok(Self { nrows, ncols, data })
    }

    /// Row-major nested construction, handy in tests.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged rows");
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        let n = self.nrows;
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        (0..self.ncols).map(move |j| self.col(j))
    }

    pub fn as_col_major(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.ncols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        assert!(k <= self.ncols);
        Self {
            nrows: self.nrows,
            ncols: k,
            data: self.data[..k * self.nrows].to_vec(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                for (yi, &a) in y.iter_mut().zip(self.col(j)) {
                    *yi += a * xj;
                }
            }
        }
        y
    }

    /// `selfᵀ x`
    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        self.columns().map(|c| dot(c, x)).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut out = Self::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let col = self.matvec(other.col(j));
            out.col_mut(j).copy_from_slice(&col);
        }
        out
    }

    /// `selfᵀ other`
    pub fn tr_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.nrows, other.nrows);
        let mut out = Self::zeros(self.ncols, other.ncols);
        for j in 0..other.ncols {
            for i in 0..self.ncols {
                out[(i, j)] = dot(self.col(i), other.col(j));
            }
        }
        out
    }

    /// Gathers the given rows into a `rows.len() × ncols` matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.ncols);
        for j in 0..self.ncols {
            for (k, &r) in rows.iter().enumerate() {
                out[(k, j)] = self[(r, j)];
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    /// Largest entrywise deviation from the transpose.
    pub fn asymmetry(&self) -> T {
        assert_eq!(self.nrows, self.ncols);
        let mut worst = T::zero();
        for j in 0..self.ncols {
            for i in 0..j {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.nrows, self.ncols)?;
        for i in 0..self.nrows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.ncols.min(12) {
                write!(f, "{:?} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting of a small square matrix.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dims("LU of square matrix", n, a.ncols()));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= T::epsilon() * scale * T::from_usize_lossy(n) || best == T::zero() {
                return Err(Error::Singular("LU factorization"));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                if l != T::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= l * xk;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                let xk = x[k];
                x[i] -= u * xk;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            inv.col_mut(j).copy_from_slice(&col);
        }
        inv
    }
}

/// 1-norm condition number, computed through the explicit inverse.
pub(crate) fn condition_number_1<T: Real>(a: &Matrix<T>) -> Result<T> {
    let inv = Lu::new(a)?.inverse();
    Ok(norm_1(a) * norm_1(&inv))
}

fn norm_1<T: Real>(a: &Matrix<T>) -> T {
    a.columns()
        .map(|c| c.iter().map(|x| x.abs()).sum::<T>())
        .fold(T::zero(), T::max)
}
