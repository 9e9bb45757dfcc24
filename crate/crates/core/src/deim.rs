//! Discrete empirical interpolation of the advection nonlinearity.

use std::path::Path;

use tracing::info;

use crate::error::{Error, Result};
use crate::flow::FlowModel;
use crate::io::{TextReader, TextWriter};
use crate::linalg::{dense::condition_number_1, Lu, Matrix};
use crate::pod::leading_left_singular;
use crate::scalar::Real;

pub const DEIM_TAG: &str = "HJBPOD-DEIM";

/// Columns `η(yⱼ)` for the given velocity fields.
pub fn nonlinearity_snapshots<'a, T, I>(model: &FlowModel<T>, fields: I) -> Result<Matrix<T>>
where
    T: Real,
    I: IntoIterator<Item = &'a [T]>,
{
    let m = model.grid().n_velocity();
    let cols = fields
        .into_iter()
        .map(|y| {
            model.grid().check_velocity_len(y.len())?;
            Ok(model.advection(y))
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_columns(m, &cols)
}

fn argmax_abs<T: Real>(v: &[T]) -> (usize, T) {
    let mut best = (0, T::zero());
    for (i, &x) in v.iter().enumerate() {
        // strict comparison keeps the lowest index on ties
        if x.abs() > best.1 {
            best = (i, x.abs());
        }
    }
    best
}

/// Greedy DEIM row selection: each new row maximizes the residual of
/// interpolating the next basis column at the rows chosen so far.
pub fn select_indices<T: Real>(basis: &Matrix<T>) -> Result<Vec<usize>> {
    let m = basis.ncols();
    if m == 0 {
        return Err(Error::Empty("DEIM basis has no columns"));
    }
    let (p1, mag) = argmax_abs(basis.col(0));
    if mag == T::zero() {
        return Err(Error::DeimSingular { k: 1 });
    }
    let mut indices = vec![p1];
    for k in 1..m {
        let prev = basis.leading_columns(k);
        let lu = Lu::new(&prev.select_rows(&indices)).map_err(|_| Error::DeimSingular { k: k + 1 })?;
        let uk = basis.col(k);
        let rhs: Vec<T> = indices.iter().map(|&p| uk[p]).collect();
        let c = lu.solve(&rhs);
        let approx = prev.matvec(&c);
        let residual: Vec<T> = uk.iter().zip(&approx).map(|(&a, &b)| a - b).collect();
        let (p, mag) = argmax_abs(&residual);
        if mag == T::zero() {
            return Err(Error::DeimSingular { k: k + 1 });
        }
        indices.push(p);
    }
    Ok(indices)
}

/// Offline DEIM data on the full grid: basis `U`, rows `P` and the
/// factorized `PᵀU`.
#[derive(Clone, Debug)]
pub struct DeimInterpolant<T> {
    basis: Matrix<T>,
    indices: Vec<usize>,
    sampled: Lu<T>,
    condition: T,
}

impl<T: Real> DeimInterpolant<T> {
    /// `basis` must have orthonormal columns.
    pub fn new(basis: Matrix<T>) -> Result<Self> {
        let indices = select_indices(&basis)?;
        let pu = basis.select_rows(&indices);
        let sampled = Lu::new(&pu).map_err(|_| Error::DeimSingular { k: basis.ncols() })?;
        let condition = condition_number_1(&pu)?;
        info!(
            m = basis.ncols(),
            condition = condition.to_f64_lossy(),
            "DEIM interpolation matrix"
        );
        Ok(Self {
            basis,
            indices,
            sampled,
            condition,
        })
    }

    /// Basis from the leading `m` left singular vectors of the nonlinearity
    /// snapshots.
    pub fn from_snapshots(snapshots: &Matrix<T>, m: usize) -> Result<Self> {
        let (basis, _) = leading_left_singular(snapshots, m)?;
        Self::new(basis)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn basis(&self) -> &Matrix<T> {
        &self.basis
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// 1-norm condition number of `PᵀU`.
    pub fn condition(&self) -> T {
        self.condition
    }

    /// Interpolation coefficients `(PᵀU)⁻¹ samples`.
    pub fn coefficients(&self, samples: &[T]) -> Result<Vec<T>> {
        if samples.len() != self.len() {
            return Err(Error::dims("DEIM samples", self.len(), samples.len()));
        }
        Ok(self.sampled.solve(samples))
    }

    /// Full-grid approximation `U (PᵀU)⁻¹ Pᵀ g`.
    pub fn reconstruct(&self, g: &[T]) -> Result<Vec<T>> {
        if g.len() != self.basis.nrows() {
            return Err(Error::dims("DEIM full vector", self.basis.nrows(), g.len()));
        }
        let samples: Vec<T> = self.indices.iter().map(|&p| g[p]).collect();
        Ok(self.basis.matvec(&self.coefficients(&samples)?))
    }

    /// Reduced operator for the Galerkin basis `psi`.
    pub fn operator(&self, psi: &Matrix<T>) -> Result<DeimOperator<T>> {
        if psi.nrows() != self.basis.nrows() {
            return Err(Error::dims("DEIM/POD grid", self.basis.nrows(), psi.nrows()));
        }
        // proj = Ψᵀ U (PᵀU)⁻¹, built column by column from the transposed solve
        let psi_u = psi.tr_matmul(&self.basis);
        let inv = self.sampled.inverse();
        Ok(DeimOperator {
            indices: self.indices.clone(),
            proj: psi_u.matmul(&inv),
        })
    }
}

/// Online DEIM operator: sampled nonlinearity values to reduced coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct DeimOperator<T> {
    indices: Vec<usize>,
    /// `ℓ × m` matrix `Ψᵀ U (PᵀU)⁻¹`.
    proj: Matrix<T>,
}

impl<T: Real> DeimOperator<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn reduced_dim(&self) -> usize {
        self.proj.nrows()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn projection(&self) -> &Matrix<T> {
        &self.proj
    }

    /// `proj · samples`
    pub fn apply(&self, samples: &[T]) -> Result<Vec<T>> {
        if samples.len() != self.len() {
            return Err(Error::dims("DEIM samples", self.len(), samples.len()));
        }
        Ok(self.proj.matvec(samples))
    }

    pub(crate) fn write(&self, w: &mut TextWriter) {
        w.line(&format!("{DEIM_TAG} v1 {} {}", self.len(), self.reduced_dim()));
        w.indices(&self.indices);
        for i in 0..self.proj.nrows() {
            w.values(&self.proj.row(i));
        }
    }

    pub(crate) fn read(r: &mut TextReader, m: usize, ell: usize) -> Result<Self> {
        let indices: Vec<usize> = r.values(m)?;
        let mut proj = Matrix::zeros(ell, m);
        for i in 0..ell {
            for (j, x) in r.values::<T>(m)?.into_iter().enumerate() {
                proj[(i, j)] = x;
            }
        }
        Ok(Self { indices, proj })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = TextWriter::default();
        self.write(&mut w);
        w.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = TextReader::open(path, DEIM_TAG)?;
        let m: usize = r.header_field(0, "m")?;
        let ell: usize = r.header_field(1, "l")?;
        let op = Self::read(&mut r, m, ell)?;
        r.finish()?;
        Ok(op)
    }
}
