//! Staggered MAC layout on the unit square.
//!
//! Velocity vectors stack the `u` unknowns (interior vertical faces) followed
//! by the `v` unknowns (interior horizontal faces), each block row-major with
//! `x` running fastest. Pressure lives at cell centres, also row-major.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CavityGrid {
    nx: usize,
    ny: usize,
}

/// One velocity unknown in staggered coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    /// `u` on the vertical face at `x = i * hx`, cell row `j`; `1 <= i < nx`.
    U { i: usize, j: usize },
    /// `v` on the horizontal face at `y = j * hy`, cell column `i`; `1 <= j < ny`.
    V { i: usize, j: usize },
}

impl CavityGrid {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells per direction, got {nx} x {ny}"
            )));
        }
        Ok(Self { nx, ny })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.nx)
    }

    pub fn hy<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.ny)
    }

    pub fn cell_area<T: Real>(&self) -> T {
        self.hx::<T>() * self.hy::<T>()
    }

    #[inline]
    pub fn n_u(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    #[inline]
    pub fn n_v(&self) -> usize {
        self.nx * (self.ny - 1)
    }

    /// Length of a velocity vector.
    #[inline]
    pub fn n_velocity(&self) -> usize {
        self.n_u() + self.n_v()
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn u_index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..self.nx).contains(&i) && j < self.ny);
        j * (self.nx - 1) + (i - 1)
    }

    #[inline]
    pub fn v_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && (1..self.ny).contains(&j));
        self.n_u() + (j - 1) * self.nx + i
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// Inverse of [`u_index`](Self::u_index) / [`v_index`](Self::v_index).
    pub fn face(&self, k: usize) -> Face {
        if k < self.n_u() {
            Face::U {
                i: k % (self.nx - 1) + 1,
                j: k / (self.nx - 1),
            }
        } else {
            let r = k - self.n_u();
            Face::V {
                i: r % self.nx,
                j: r / self.nx + 1,
            }
        }
    }

    /// Physical position of a velocity unknown.
    pub fn face_position<T: Real>(&self, k: usize) -> (T, T) {
        let half = T::lit(0.5);
        match self.face(k) {
            Face::U { i, j } => (
                T::from_usize_lossy(i) * self.hx::<T>(),
                (T::from_usize_lossy(j) + half) * self.hy::<T>(),
            ),
            Face::V { i, j } => (
                (T::from_usize_lossy(i) + half) * self.hx::<T>(),
                T::from_usize_lossy(j) * self.hy::<T>(),
            ),
        }
    }

    pub(crate) fn check_velocity_len(&self, len: usize) -> Result<()> {
        if len != self.n_velocity() {
            return Err(Error::dims("velocity vector", self.n_velocity(), len));
        }
        Ok(())
    }
}
