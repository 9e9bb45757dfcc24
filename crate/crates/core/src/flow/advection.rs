//! Conservative advection `(y·∇)y` on the staggered grid with donor-cell
//! blending: a face flux `ā² - γ|ā|δ` (`ā` the average, `δ` half the jump)
//! interpolates between central (`γ = 0`) and full upwind (`γ = 1`).

use std::cell::RefCell;

use crate::flow::Walls;
use crate::grid::{CavityGrid, Face};
use crate::scalar::Real;

/// Read access to velocity unknowns by global index.
pub trait VelocityLookup<T> {
    fn velocity(&self, k: usize) -> T;
}

impl<T: Copy> VelocityLookup<T> for [T] {
    #[inline]
    fn velocity(&self, k: usize) -> T {
        self[k]
    }
}

impl<T: Copy> VelocityLookup<T> for Vec<T> {
    #[inline]
    fn velocity(&self, k: usize) -> T {
        self[k]
    }
}

struct Ctx<'a, T, L: ?Sized> {
    grid: &'a CavityGrid,
    walls: &'a Walls<T>,
    y: &'a L,
}

impl<T: Real, L: VelocityLookup<T> + ?Sized> Ctx<'_, T, L> {
    /// `u` at vertical face `i`, row `j`, with ghost rows `j = -1, ny`.
    fn u(&self, i: isize, j: isize) -> T {
        let (nx, ny) = (self.grid.nx() as isize, self.grid.ny() as isize);
        if i <= 0 || i >= nx {
            return T::zero();
        }
        let two = T::lit(2.0);
        if j < 0 {
            two * self.walls.bottom - self.u(i, 0)
        } else if j >= ny {
            two * self.walls.top - self.u(i, ny - 1)
        } else {
            self.y.velocity(self.grid.u_index(i as usize, j as usize))
        }
    }

    /// `v` at horizontal face `j`, column `i`, with ghost columns `i = -1, nx`.
    fn v(&self, i: isize, j: isize) -> T {
        let (nx, ny) = (self.grid.nx() as isize, self.grid.ny() as isize);
        if j <= 0 || j >= ny {
            return T::zero();
        }
        let two = T::lit(2.0);
        if i < 0 {
            two * self.walls.left - self.v(0, j)
        } else if i >= nx {
            two * self.walls.right - self.v(nx - 1, j)
        } else {
            self.y.velocity(self.grid.v_index(i as usize, j as usize))
        }
    }
}

#[inline]
fn flux<T: Real>(carrier: T, avg: T, half_jump: T, gamma: T) -> T {
    carrier * avg - gamma * carrier.abs() * half_jump
}

/// The advection nonlinearity `η(y) = -(y·∇)y` at one velocity unknown.
pub fn advection_at<T, L>(grid: &CavityGrid, walls: &Walls<T>, gamma: T, k: usize, y: &L) -> T
where
    T: Real,
    L: VelocityLookup<T> + ?Sized,
{
    let c = Ctx { grid, walls, y };
    let half = T::lit(0.5);
    let ihx = T::one() / grid.hx::<T>();
    let ihy = T::one() / grid.hy::<T>();
    match grid.face(k) {
        Face::U { i, j } => {
            let (i, j) = (i as isize, j as isize);
            // (u²)_x between cell centres i-1 and i
            let cell = |ic: isize| {
                let (l, r) = (c.u(ic, j), c.u(ic + 1, j));
                let a = half * (l + r);
                flux(a, a, half * (r - l), gamma)
            };
            // (uv)_y between vertices at y_j and y_{j+1}
            let vertex = |jv: isize| {
                let (b, t) = (c.u(i, jv - 1), c.u(i, jv));
                let va = half * (c.v(i - 1, jv) + c.v(i, jv));
                flux(va, half * (b + t), half * (t - b), gamma)
            };
            -((cell(i) - cell(i - 1)) * ihx + (vertex(j + 1) - vertex(j)) * ihy)
        }
        Face::V { i, j } => {
            let (i, j) = (i as isize, j as isize);
            // (uv)_x between vertices at x_i and x_{i+1}
            let vertex = |iv: isize| {
                let (l, r) = (c.v(iv - 1, j), c.v(iv, j));
                let ua = half * (c.u(iv, j - 1) + c.u(iv, j));
                flux(ua, half * (l + r), half * (r - l), gamma)
            };
            // (v²)_y between cell centres j-1 and j
            let cell = |jc: isize| {
                let (b, t) = (c.v(i, jc), c.v(i, jc + 1));
                let a = half * (b + t);
                flux(a, a, half * (t - b), gamma)
            };
            -((vertex(i + 1) - vertex(i)) * ihx + (cell(j) - cell(j - 1)) * ihy)
        }
    }
}

/// `η(y)` at every velocity unknown.
pub fn advection<T: Real>(grid: &CavityGrid, walls: &Walls<T>, gamma: T, y: &[T]) -> Vec<T> {
    (0..grid.n_velocity())
        .map(|k| advection_at(grid, walls, gamma, k, y))
        .collect()
}

struct Recorder<'a>(&'a RefCell<Vec<usize>>);

impl<T: Real> VelocityLookup<T> for Recorder<'_> {
    fn velocity(&self, k: usize) -> T {
        self.0.borrow_mut().push(k);
        T::zero()
    }
}

/// Sorted, deduplicated velocity unknowns read by [`advection_at`] at `k`.
pub fn stencil(grid: &CavityGrid, k: usize) -> Vec<usize> {
    let touched = RefCell::new(Vec::new());
    let walls = Walls::<f64>::at_rest();
    advection_at(grid, &walls, 0.5, k, &Recorder(&touched));
    let mut s = touched.into_inner();
    s.sort_unstable();
    s.dedup();
    s
}
