//! Semi-Lagrangian value iteration for the stationary discounted HJB
//! equation on a box in reduced coordinates, and the induced feedback.
//!
//! The fully discrete scheme on grid nodes `xᵢ` reads
//!
//! `V(xᵢ) = min_{u ∈ U} { (1 - λh) I[V](xᵢ + h f(xᵢ, u)) + h L(xᵢ, u) }`
//!
//! with `I` the multilinear interpolant on the node values.

mod grid;
mod policy;
mod solve;

pub use grid::ValueGrid;
pub use policy::{FeedbackPolicy, OnlineFeedback};
pub use solve::{SolveOptions, SolveReport, SweepMode};

/// Controlled dynamics `ẋ = f(x, u)` with running cost `L(x, u)`, scalar
/// control. Implementations are called concurrently from sweep threads.
pub trait ControlSystem<T>: Sync {
    fn state_dim(&self) -> usize;
    fn dynamics(&self, x: &[T], u: T, dx: &mut [T]);
    fn running_cost(&self, x: &[T], u: T) -> T;
}

/// [`ControlSystem`] from a pair of closures.
pub struct FnSystem<F, L> {
    dim: usize,
    f: F,
    l: L,
}

impl<F, L> FnSystem<F, L> {
    pub fn new(dim: usize, f: F, l: L) -> Self {
        Self { dim, f, l }
    }
}

impl<T, F, L> ControlSystem<T> for FnSystem<F, L>
where
    F: Fn(&[T], T, &mut [T]) + Sync,
    L: Fn(&[T], T) -> T + Sync,
{
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn dynamics(&self, x: &[T], u: T, dx: &mut [T]) {
        (self.f)(x, u, dx)
    }

    fn running_cost(&self, x: &[T], u: T) -> T {
        (self.l)(x, u)
    }
}
