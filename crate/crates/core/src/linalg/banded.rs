use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::scalar::Real;

/// Cholesky factorization `A = L Lᵀ` of a symmetric positive definite banded
/// matrix. Storage is the lower band, row by row: entry `(i, j)` with
/// `i - bw <= j <= i` lives at `i * (bw + 1) + (j + bw - i)`.
#[derive(Clone, Debug)]
pub struct BandedCholesky<T> {
    n: usize,
    bw: usize,
    band: Vec<T>,
}

impl<T: Real> BandedCholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dims("banded Cholesky of square matrix", n, a.ncols()));
        }
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![T::zero(); n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    band[i * w + (j + bw - i)] += v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // s = A[i][j] - sum_k L[i][k] L[j][k]
                let mut s = band[i * w + (j + bw - i)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if i == j {
                    if s <= T::zero() || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite {
                            row: i,
                            pivot: s.to_f64_lossy(),
                        });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        assert_eq!(x.len(), self.n);
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[i * w + (k + bw - i)] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(self.n) {
                s -= self.band[k * w + (i + bw - k)] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    fn tridiag(n: usize) -> CsrMatrix<f64> {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0);
            if i > 0 {
                b.push(i, i - 1, -1.0);
                b.push(i - 1, i, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn solves_tridiagonal() {
        let a = tridiag(7);
        let chol = BandedCholesky::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let x = chol.solve(&a.matvec(&x_true));
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = tridiag(4).shifted(-3.0, 1.0);
        assert!(matches!(
            BandedCholesky::factor(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
