use crate::grid::CavityGrid;
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::scalar::Real;

/// Tangential wall velocities. Normal velocity is zero on every wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Walls<T> {
    /// `u` on `y = 1` (the lid).
    pub top: T,
    /// `u` on `y = 0`.
    pub bottom: T,
    /// `v` on `x = 0`.
    pub left: T,
    /// `v` on `x = 1`.
    pub right: T,
}

impl<T: Real> Walls<T> {
    /// Lid moving with velocity `lid` in `+x`, all other walls at rest.
    pub fn lid_driven(lid: T) -> Self {
        Self {
            top: lid,
            bottom: T::zero(),
            left: T::zero(),
            right: T::zero(),
        }
    }

    pub fn at_rest() -> Self {
        Self::lid_driven(T::zero())
    }

    pub fn max_speed(&self) -> T {
        self.top
            .abs()
            .max(self.bottom.abs())
            .max(self.left.abs())
            .max(self.right.abs())
    }
}

/// Linear operators of the semi-discrete system
/// `ẏ + ν A y + C p = η(y) + ν a + B u`, `D y = 0`.
#[derive(Clone, Debug)]
pub struct SemiDiscreteOperators<T> {
    /// Negative 5-point Laplacian on interior velocity unknowns, homogeneous
    /// Dirichlet data eliminated through ghost values (SPD).
    pub laplacian: CsrMatrix<T>,
    /// Boundary contribution: the discrete Laplacian of `y` is `a - A y`.
    pub boundary: Vec<T>,
    /// Pressure gradient, cells to velocity unknowns.
    pub gradient: CsrMatrix<T>,
    /// Discrete divergence, velocity unknowns to cells. Equals `-Cᵀ`.
    pub divergence: CsrMatrix<T>,
    /// Control injection columns `b_i`.
    pub control: Vec<Vec<T>>,
}

impl<T: Real> SemiDiscreteOperators<T> {
    /// Viscosity is not an input: it only scales `A` and `a` in the momentum
    /// balance.
    pub fn assemble(grid: &CavityGrid, walls: &Walls<T>) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let n = grid.n_velocity();
        let ihx2 = T::one() / (grid.hx::<T>() * grid.hx::<T>());
        let ihy2 = T::one() / (grid.hy::<T>() * grid.hy::<T>());
        let two = T::lit(2.0);

        let mut lap = TripletBuilder::new(n, n);
        let mut boundary = vec![T::zero(); n];
        for j in 0..ny {
            for i in 1..nx {
                let k = grid.u_index(i, j);
                // x: neighbours at i = 0 and i = nx sit on walls where u = 0.
                lap.push(k, k, two * ihx2);
                if i > 1 {
                    lap.push(k, grid.u_index(i - 1, j), -ihx2);
                }
                if i < nx - 1 {
                    lap.push(k, grid.u_index(i + 1, j), -ihx2);
                }
                // y: ghost u = 2 u_wall - u across top and bottom.
                lap.push(k, k, two * ihy2);
                if j > 0 {
                    lap.push(k, grid.u_index(i, j - 1), -ihy2);
                } else {
                    lap.push(k, k, ihy2);
                    boundary[k] += two * walls.bottom * ihy2;
                }
                if j < ny - 1 {
                    lap.push(k, grid.u_index(i, j + 1), -ihy2);
                } else {
                    lap.push(k, k, ihy2);
                    boundary[k] += two * walls.top * ihy2;
                }
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let k = grid.v_index(i, j);
                lap.push(k, k, two * ihy2);
                if j > 1 {
                    lap.push(k, grid.v_index(i, j - 1), -ihy2);
                }
                if j < ny - 1 {
                    lap.push(k, grid.v_index(i, j + 1), -ihy2);
                }
                lap.push(k, k, two * ihx2);
                if i > 0 {
                    lap.push(k, grid.v_index(i - 1, j), -ihx2);
                } else {
                    lap.push(k, k, ihx2);
                    boundary[k] += two * walls.left * ihx2;
                }
                if i < nx - 1 {
                    lap.push(k, grid.v_index(i + 1, j), -ihx2);
                } else {
                    lap.push(k, k, ihx2);
                    boundary[k] += two * walls.right * ihx2;
                }
            }
        }

        let ihx = T::one() / grid.hx::<T>();
        let ihy = T::one() / grid.hy::<T>();
        let mut grad = TripletBuilder::new(n, grid.n_cells());
        for j in 0..ny {
            for i in 1..nx {
                let k = grid.u_index(i, j);
                grad.push(k, grid.cell_index(i, j), ihx);
                grad.push(k, grid.cell_index(i - 1, j), -ihx);
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let k = grid.v_index(i, j);
                grad.push(k, grid.cell_index(i, j), ihy);
                grad.push(k, grid.cell_index(i, j - 1), -ihy);
            }
        }
        let gradient = grad.build();
        let mut div = TripletBuilder::new(grid.n_cells(), n);
        for r in 0..n {
            for (c, v) in gradient.row(r) {
                div.push(c, r, -v);
            }
        }

        Self {
            laplacian: lap.build(),
            boundary,
            gradient,
            divergence: div.build(),
            control: Vec::new(),
        }
    }

    /// `ν (a - A y)`
    pub fn viscous(&self, nu: T, y: &[T]) -> Vec<T> {
        let mut out = self.laplacian.matvec(y);
        for (o, &a) in out.iter_mut().zip(&self.boundary) {
            *o = nu * (a - *o);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::BandedCholesky;

    #[test]
    fn divergence_is_negative_gradient_transpose() {
        let g = CavityGrid::new(6, 5).unwrap();
        let ops = SemiDiscreteOperators::<f64>::assemble(&g, &Walls::lid_driven(1.0));
        let d = ops.divergence.to_dense();
        let c = ops.gradient.to_dense();
        for r in 0..g.n_cells() {
            for k in 0..g.n_velocity() {
                assert!((d[(r, k)] + c[(k, r)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_is_spd() {
        let g = CavityGrid::new(5, 6).unwrap();
        let ops = SemiDiscreteOperators::<f64>::assemble(&g, &Walls::lid_driven(1.0));
        assert_eq!(ops.laplacian.to_dense().asymmetry(), 0.0);
        assert!(BandedCholesky::factor(&ops.laplacian).is_ok());
    }

    #[test]
    fn boundary_vector_only_on_lid_row() {
        let g = CavityGrid::new(4, 4).unwrap();
        let ops = SemiDiscreteOperators::<f64>::assemble(&g, &Walls::lid_driven(1.0));
        for k in 0..g.n_velocity() {
            let expect = match g.face(k) {
                crate::grid::Face::U { j: 3, .. } => 2.0 * 16.0,
                _ => 0.0,
            };
            assert_eq!(ops.boundary[k], expect);
        }
    }
}
