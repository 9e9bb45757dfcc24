//! Staggered-grid finite differences for the controlled incompressible
//! Navier-Stokes equations in the unit square.

mod advection;
mod operators;
mod steady;
pub(crate) mod stepper;

pub use advection::{advection, advection_at, stencil, VelocityLookup};
pub use operators::{SemiDiscreteOperators, Walls};
pub use steady::{steady_state, SteadyOptions, SteadyState};
pub use stepper::{Stepper, Trajectory};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::CavityGrid;
use crate::linalg::{BandedCholesky, CsrMatrix, TripletBuilder};
use crate::scalar::{all_finite, axpy, norm_inf, Real};

/// Velocity on interior faces plus pressure at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredState<T> {
    /// `u` unknowns followed by `v` unknowns, see [`CavityGrid`].
    pub velocity: Vec<T>,
    pub pressure: Vec<T>,
    pub time: T,
}

impl<T: Real> StaggeredState<T> {
    pub fn rest(grid: &CavityGrid) -> Self {
        Self {
            velocity: vec![T::zero(); grid.n_velocity()],
            pressure: vec![T::zero(); grid.n_cells()],
            time: T::zero(),
        }
    }

    pub fn u_faces<'a>(&'a self, grid: &CavityGrid) -> &'a [T] {
        &self.velocity[..grid.n_u()]
    }

    pub fn v_faces<'a>(&'a self, grid: &CavityGrid) -> &'a [T] {
        &self.velocity[grid.n_u()..]
    }

    /// Discrete kinetic energy `½ |y|²` weighted by the cell area.
    pub fn kinetic_energy(&self, grid: &CavityGrid) -> T {
        let e: T = self.velocity.iter().map(|&x| x * x).sum();
        T::lit(0.5) * grid.cell_area::<T>() * e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    NavierStokesSteady,
    StokesSteady,
}

impl ShapeKind {
    pub fn tag(self) -> &'static str {
        match self {
            ShapeKind::NavierStokesSteady => "ns",
            ShapeKind::StokesSteady => "stokes",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ShapeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ns" | "navier-stokes" | "navierstokes" => Ok(ShapeKind::NavierStokesSteady),
            "stokes" => Ok(ShapeKind::StokesSteady),
            other => Err(format!("unknown shape kind `{other}` (expected ns or stokes)")),
        }
    }
}

/// Spatial profile `b(x)` through which a scalar control forces momentum.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeFunction<T> {
    pub kind: ShapeKind,
    /// Values on the velocity unknowns.
    pub field: Vec<T>,
}

/// Discretized cavity problem: grid, wall data, viscosity, operators and the
/// pressure-Poisson factorization shared by all time steps.
#[derive(Clone, Debug)]
pub struct FlowModel<T> {
    grid: CavityGrid,
    walls: Walls<T>,
    nu: T,
    upwind: T,
    ops: SemiDiscreteOperators<T>,
    poisson: BandedCholesky<T>,
}

impl<T: Real> FlowModel<T> {
    /// `upwind` is the donor-cell blending weight in `[0, 1]`.
    pub fn new(grid: CavityGrid, walls: Walls<T>, nu: T, upwind: T) -> Result<Self> {
        if !(nu > T::zero()) {
            return Err(Error::param("nu", "viscosity must be positive"));
        }
        if !(upwind >= T::zero() && upwind <= T::one()) {
            return Err(Error::param("upwind", "blending weight must lie in [0, 1]"));
        }
        let ops = SemiDiscreteOperators::assemble(&grid, &walls);
        let poisson = BandedCholesky::factor(&pinned_poisson(&ops.gradient))?;
        Ok(Self {
            grid,
            walls,
            nu,
            upwind,
            ops,
            poisson,
        })
    }

    /// Installs the control injection columns; one per scalar control.
    pub fn with_shapes(mut self, shapes: &[ShapeFunction<T>]) -> Result<Self> {
        for s in shapes {
            self.grid.check_velocity_len(s.field.len())?;
        }
        self.ops.control = shapes.iter().map(|s| s.field.clone()).collect();
        Ok(self)
    }

    pub fn grid(&self) -> &CavityGrid {
        &self.grid
    }

    pub fn walls(&self) -> &Walls<T> {
        &self.walls
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn upwind(&self) -> T {
        self.upwind
    }

    pub fn operators(&self) -> &SemiDiscreteOperators<T> {
        &self.ops
    }

    pub fn n_controls(&self) -> usize {
        self.ops.control.len()
    }

    pub fn advection(&self, y: &[T]) -> Vec<T> {
        advection(&self.grid, &self.walls, self.upwind, y)
    }

    pub fn divergence(&self, y: &[T]) -> Vec<T> {
        self.ops.divergence.matvec(y)
    }

    /// Unprojected momentum forcing `ν(a - Ay) + η(y) + Σ bᵢuᵢ`; the
    /// advection term is dropped when `with_advection` is false.
    pub fn momentum(&self, y: &[T], controls: &[T], with_advection: bool) -> Result<Vec<T>> {
        self.grid.check_velocity_len(y.len())?;
        self.check_controls(controls)?;
        let mut f = self.ops.viscous(self.nu, y);
        if with_advection {
            axpy(T::one(), &self.advection(y), &mut f);
        }
        for (b, &u) in self.ops.control.iter().zip(controls) {
            axpy(u, b, &mut f);
        }
        Ok(f)
    }

    /// Right-hand side `f(y, u)` of the velocity dynamics on the
    /// divergence-free subspace: the momentum forcing with its gradient part
    /// removed.
    pub fn rhs(&self, y: &[T], controls: &[T]) -> Result<Vec<T>> {
        let f = self.momentum(y, controls, true)?;
        Ok(self.project_divergence_free(&f))
    }

    /// Stokes variant of [`rhs`](Self::rhs) without advection.
    pub fn stokes_rhs(&self, y: &[T], controls: &[T]) -> Result<Vec<T>> {
        let f = self.momentum(y, controls, false)?;
        Ok(self.project_divergence_free(&f))
    }

    /// Pressure `p` with `C p` the gradient part of `f` (gauge: first cell 0).
    pub fn gradient_potential(&self, f: &[T]) -> Vec<T> {
        let mut rhs = self.ops.gradient.tr_matvec(f);
        self.poisson.solve_in_place(&mut rhs);
        rhs
    }

    /// Discrete Leray projection `z - C (CᵀC)⁻¹ Cᵀ z`.
    pub fn project_divergence_free(&self, z: &[T]) -> Vec<T> {
        let phi = self.gradient_potential(z);
        let mut out = z.to_vec();
        axpy(-T::one(), &self.ops.gradient.matvec(&phi), &mut out);
        out
    }

    pub fn stepper(&self, dt: T) -> Result<Stepper<'_, T>> {
        Stepper::new(self, dt)
    }

    /// Advective stability bound `0.8 min(hx, hy) / max|y|`, wall speeds
    /// included in the maximum.
    pub fn stable_dt(&self, y: &[T]) -> T {
        let h = self.grid.hx::<T>().min(self.grid.hy::<T>());
        let vmax = norm_inf(y).max(self.walls.max_speed());
        if vmax == T::zero() {
            T::infinity()
        } else {
            T::lit(0.8) * h / vmax
        }
    }

    pub(crate) fn check_controls(&self, controls: &[T]) -> Result<()> {
        if controls.len() != self.n_controls() {
            return Err(Error::dims("control vector", self.n_controls(), controls.len()));
        }
        if !all_finite(controls) {
            return Err(Error::param("controls", "non-finite control value"));
        }
        Ok(())
    }
}

/// `CᵀC + e₀e₀ᵀ`: the Neumann pressure Laplacian made definite by pinning
/// the first cell. Compatible right-hand sides (zero sum) are solved exactly
/// with `p₀ = 0`.
fn pinned_poisson<T: Real>(gradient: &CsrMatrix<T>) -> CsrMatrix<T> {
    let gram = gradient.gram();
    let n = gram.nrows();
    let mut b = TripletBuilder::new(n, n);
    for r in 0..n {
        for (c, v) in gram.row(r) {
            b.push(r, c, v);
        }
    }
    b.push(0, 0, T::one());
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_removes_divergence_and_is_idempotent() {
        let grid = CavityGrid::new(8, 7).unwrap();
        let model = FlowModel::new(grid, Walls::lid_driven(1.0), 0.01, 0.5).unwrap();
        let z: Vec<f64> = (0..grid.n_velocity()).map(|k| ((k * 31 % 17) as f64).sin()).collect();
        let pz = model.project_divergence_free(&z);
        let div = model.divergence(&pz);
        assert!(norm_inf(&div) < 1e-11 * norm_inf(&z) * 8.0);
        let ppz = model.project_divergence_free(&pz);
        for (a, b) in pz.iter().zip(&ppz) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let grid = CavityGrid::new(4, 4).unwrap();
        assert!(FlowModel::new(grid, Walls::lid_driven(1.0), 0.0, 0.5).is_err());
        assert!(FlowModel::new(grid, Walls::lid_driven(1.0), 0.01, 1.5).is_err());
    }

    #[test]
    fn shape_kind_parses() {
        assert_eq!("ns".parse::<ShapeKind>().unwrap(), ShapeKind::NavierStokesSteady);
        assert_eq!("Stokes".parse::<ShapeKind>().unwrap(), ShapeKind::StokesSteady);
        assert!("heat".parse::<ShapeKind>().is_err());
    }
}
