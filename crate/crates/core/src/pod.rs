//! Proper orthogonal decomposition of the snapshot matrix in the Euclidean
//! inner product, and the affine ansatz `y = ȳ + Σ wᵢ ψᵢ`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::CavityGrid;
use crate::io::{TextReader, TextWriter};
use crate::linalg::{thin_svd, Matrix};
use crate::scalar::{dot, Real};
use crate::snapshot::SnapshotSet;

pub const BASIS_TAG: &str = "HJBPOD-BASIS";

/// Relative threshold below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Number of singular values `σᵢ >= RANK_TOL · σ₁`.
pub fn numerical_rank<T: Real>(sigma: &[T]) -> usize {
    let Some(&s1) = sigma.first() else { return 0 };
    if s1 <= T::zero() {
        return 0;
    }
    let cut = T::lit(RANK_TOL) * s1;
    sigma.iter().take_while(|&&s| s >= cut).count()
}

/// Leading `k` left singular vectors of `a`, each flipped so that its
/// largest-magnitude entry (first one on ties) is positive, together with
/// every singular value of `a`.
pub(crate) fn leading_left_singular<T: Real>(a: &Matrix<T>, k: usize) -> Result<(Matrix<T>, Vec<T>)> {
    let svd = thin_svd(a);
    let rank = numerical_rank(&svd.sigma);
    if k == 0 || k > rank {
        return Err(Error::RankDeficient {
            requested: k,
            rank,
            sigma: svd.sigma.get(k.saturating_sub(1)).map_or(0.0, |s| s.to_f64_lossy()),
        });
    }
    let mut basis = svd.u.leading_columns(k);
    for j in 0..k {
        let col = basis.col_mut(j);
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < T::zero() {
            col.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok((basis, svd.sigma))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis<T> {
    grid: CavityGrid,
    mean: Vec<T>,
    sigma: Vec<T>,
    psi: Matrix<T>,
}

impl<T: Real> PodBasis<T> {
    /// Rank-`ell` POD basis: the leading left singular vectors of the
    /// mean-subtracted snapshot matrix.
    pub fn compute(set: &SnapshotSet<T>, ell: usize) -> Result<Self> {
        let (psi, sigma) = leading_left_singular(set.fluctuations(), ell)?;
        Ok(Self {
            grid: *set.grid(),
            mean: set.mean().to_vec(),
            sigma,
            psi,
        })
    }

    pub fn grid(&self) -> &CavityGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.psi.ncols()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// All singular values of the snapshot matrix, non-increasing.
    pub fn singular_values(&self) -> &[T] {
        &self.sigma
    }

    /// Basis vectors as columns.
    pub fn modes(&self) -> &Matrix<T> {
        &self.psi
    }

    pub fn mode(&self, i: usize) -> &[T] {
        self.psi.col(i)
    }

    /// `wᵢ = ψᵢᵀ (y - ȳ)`
    pub fn project(&self, y: &[T]) -> Result<Vec<T>> {
        self.grid.check_velocity_len(y.len())?;
        let d: Vec<T> = y.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        Ok(self.psi.tr_matvec(&d))
    }

    /// `ȳ + Σ wᵢ ψᵢ`
    pub fn reconstruct(&self, w: &[T]) -> Result<Vec<T>> {
        if w.len() != self.dim() {
            return Err(Error::dims("POD coefficients", self.dim(), w.len()));
        }
        let mut y = self.psi.matvec(w);
        for (yi, &m) in y.iter_mut().zip(&self.mean) {
            *yi += m;
        }
        Ok(y)
    }

    /// Largest deviation of `ΨᵀΨ` from the identity.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let e = if i == j { T::one() } else { T::zero() };
                worst = worst.max((dot(self.mode(i), self.mode(j)) - e).abs());
            }
        }
        worst
    }

    /// Energy `Σ_{i>ℓ} σᵢ²` discarded by the truncation.
    pub fn discarded_energy(&self) -> T {
        self.sigma[self.dim()..].iter().map(|&s| s * s).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = TextWriter::new(
            BASIS_TAG,
            &[
                self.grid.nx().to_string(),
                self.grid.ny().to_string(),
                self.dim().to_string(),
                self.sigma.len().to_string(),
            ],
        );
        w.values(&self.mean).values(&self.sigma);
        for c in self.psi.columns() {
            w.values(c);
        }
        w.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = TextReader::open(path, BASIS_TAG)?;
        let grid = CavityGrid::new(r.header_field(0, "nx")?, r.header_field(1, "ny")?)?;
        let ell: usize = r.header_field(2, "l")?;
        let n: usize = r.header_field(3, "n")?;
        let m = grid.n_velocity();
        let mean = r.values(m)?;
        let sigma = r.values(n)?;
        let mut cols = Vec::with_capacity(ell);
        for _ in 0..ell {
            cols.push(r.values(m)?);
        }
        r.finish()?;
        Ok(Self {
            grid,
            mean,
            sigma,
            psi: Matrix::from_columns(m, &cols)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::StaggeredState;

    fn set_from_columns(grid: CavityGrid, cols: &[Vec<f64>]) -> SnapshotSet<f64> {
        let states: Vec<_> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| StaggeredState {
                velocity: c.clone(),
                pressure: vec![0.0; grid.n_cells()],
                time: j as f64,
            })
            .collect();
        let refs: Vec<_> = states.iter().collect();
        SnapshotSet::from_states(grid, &refs).unwrap()
    }

    #[test]
    fn rank_one_basis_is_normalized_column() {
        let g = CavityGrid::new(4, 4).unwrap();
        let m = g.n_velocity();
        let c: Vec<f64> = (0..m).map(|k| ((k * k) as f64 * 0.01).cos()).collect();
        // two snapshots ±c around zero mean: Y = [c, -c], sigma_1 = sqrt(2) |c|
        let neg: Vec<f64> = c.iter().map(|x| -x).collect();
        let set = set_from_columns(g, &[c.clone(), neg]);
        let basis = PodBasis::compute(&set, 1).unwrap();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((basis.singular_values()[0] - 2f64.sqrt() * norm).abs() < 1e-12 * norm);
        for (p, x) in basis.mode(0).iter().zip(&c) {
            assert!((p - x / norm).abs() < 1e-14);
        }
        assert!(matches!(
            PodBasis::compute(&set, 2),
            Err(Error::RankDeficient {
                requested: 2,
                rank: 1,
                ..
            })
        ));
    }

    #[test]
    fn project_reconstruct_identities() {
        let g = CavityGrid::new(5, 4).unwrap();
        let m = g.n_velocity();
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|j| {
                (0..m)
                    .map(|k| ((k * (j + 1)) as f64 * 0.13).sin() + j as f64 * 0.01)
                    .collect()
            })
            .collect();
        let set = set_from_columns(g, &cols);
        let basis = PodBasis::compute(&set, 3).unwrap();
        assert!(basis.project(basis.mean()).unwrap().iter().all(|w| *w == 0.0));
        let y: Vec<f64> = basis.mean().iter().zip(basis.mode(1)).map(|(a, b)| a + b).collect();
        let w = basis.project(&y).unwrap();
        assert!((w[0]).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14 && w[2].abs() < 1e-14);
        assert_eq!(basis.reconstruct(&[0.0; 3]).unwrap(), basis.mean());
        assert!(basis.reconstruct(&[0.0; 2]).is_err());
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let g = CavityGrid::new(4, 5).unwrap();
        let m = g.n_velocity();
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|j| (0..m).map(|k| -(((k * (j + 1)) as f64) * 0.21).sin()).collect())
            .collect();
        let set = set_from_columns(g, &cols);
        let basis = PodBasis::compute(&set, 3).unwrap();
        for i in 0..3 {
            let col = basis.mode(i);
            let big = col.iter().fold(0.0f64, |a, &x| if x.abs() > a.abs() { x } else { a });
            assert!(big > 0.0);
        }
        assert_eq!(basis, PodBasis::compute(&set, 3).unwrap());
    }
}
