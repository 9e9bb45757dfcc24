use crate::linalg::Matrix;
use crate::scalar::{dot, norm2, Real};

/// Thin singular value decomposition `A = U diag(sigma) Vᵀ` with singular
/// values sorted non-increasing.
#[derive(Clone, Debug)]
pub struct ThinSvd<T> {
    /// `m × r` left singular vectors, `r = min(m, n)`.
    pub u: Matrix<T>,
    pub sigma: Vec<T>,
    /// `n × r` right singular vectors.
    pub v: Matrix<T>,
}

/// Householder QR of a tall matrix (`m >= n`), returning the thin factors
/// `Q` (`m × n`, orthonormal columns) and upper triangular `R` (`n × n`).
pub fn householder_qr<T: Real>(a: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let (m, n) = (a.nrows(), a.ncols());
    assert!(m >= n, "householder_qr expects a tall matrix");
    let mut work = a.clone();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    for k in 0..n {
        let x = &work.col(k)[k..];
        let alpha = norm2(x);
        let mut v = x.to_vec();
        if alpha == T::zero() {
            reflectors.push(v.iter().map(|_| T::zero()).collect());
            continue;
        }
        let sign = if v[0] >= T::zero() { T::one() } else { -T::one() };
        v[0] += sign * alpha;
        let vnorm = norm2(&v);
        v.iter_mut().for_each(|vi| *vi /= vnorm);
        for j in k..n {
            let col = &mut work.col_mut(j)[k..];
            let s = dot(&v, col);
            let two_s = s + s;
            for (ci, &vi) in col.iter_mut().zip(&v) {
                *ci -= two_s * vi;
            }
        }
        reflectors.push(v);
    }
    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            r[(i, j)] = work[(i, j)];
        }
    }
    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = T::one();
    }
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for j in 0..n {
            let col = &mut q.col_mut(j)[k..];
            let s = dot(v, col);
            let two_s = s + s;
            for (ci, &vi) in col.iter_mut().zip(v) {
                *ci -= two_s * vi;
            }
        }
    }
    (q, r)
}

/// One-sided (Hestenes) Jacobi SVD of a small matrix with `m >= n`.
/// Returns `(U, sigma, V)` unsorted; columns of `U` with zero singular value
/// are left zero.
fn one_sided_jacobi<T: Real>(a: &Matrix<T>) -> (Matrix<T>, Vec<T>, Matrix<T>) {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let tol = T::epsilon() * T::from_usize_lossy(a.nrows().max(1));
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = Vec::with_capacity(n);
    for j in 0..n {
        let s = norm2(w.col(j));
        sigma.push(s);
        if s > T::zero() {
            w.col_mut(j).iter_mut().for_each(|x| *x /= s);
        }
    }
    (w, sigma, v)
}

fn rotate<T: Real>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    for i in 0..m.nrows() {
        let xp = m[(i, p)];
        let xq = m[(i, q)];
        m[(i, p)] = c * xp - s * xq;
        m[(i, q)] = s * xp + c * xq;
    }
}

/// Thin SVD by Householder QR followed by one-sided Jacobi on the triangular
/// factor. Accurate to working precision relative to `sigma[0]` for every
/// singular value, including the small ones.
pub fn thin_svd<T: Real>(a: &Matrix<T>) -> ThinSvd<T> {
    if a.nrows() < a.ncols() {
        let t = thin_svd(&a.transpose());
        return ThinSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let (q, r) = householder_qr(a);
    let (ur, sigma, v) = one_sided_jacobi(&r);
    let u = q.matmul(&ur);

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).expect("finite singular values"));
    let cols_u: Vec<Vec<T>> = order.iter().map(|&j| u.col(j).to_vec()).collect();
    let cols_v: Vec<Vec<T>> = order.iter().map(|&j| v.col(j).to_vec()).collect();
    ThinSvd {
        u: Matrix::from_columns(u.nrows(), &cols_u).expect("consistent columns"),
        sigma: order.iter().map(|&j| sigma[j]).collect(),
        v: Matrix::from_columns(v.nrows(), &cols_v).expect("consistent columns"),
    }
}
