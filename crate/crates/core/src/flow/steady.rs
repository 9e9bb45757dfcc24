use tracing::debug;

use crate::error::{Error, Result};
use crate::flow::{FlowModel, ShapeKind, StaggeredState};
use crate::linalg::BandedCholesky;
use crate::scalar::{axpy, dot, norm_inf, Real};

#[derive(Clone, Copy, Debug)]
pub struct SteadyOptions<T> {
    /// Bound on `‖f(y, 0)‖∞`.
    pub tol: T,
    /// Pseudo-time step budget for the Navier-Stokes march.
    pub max_steps: usize,
    /// Pseudo-time step; defaults to half the advective bound at unit speed.
    pub pseudo_dt: Option<T>,
    /// Residual is evaluated every this many pseudo-time steps.
    pub check_every: usize,
}

impl<T: Real> Default for SteadyOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_steps: 200_000,
            pseudo_dt: None,
            check_every: 25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState<T> {
    pub state: StaggeredState<T>,
    /// Final `‖f(y, 0)‖∞`.
    pub residual: T,
    /// Pseudo-time steps (Navier-Stokes) or CG iterations (Stokes).
    pub iterations: usize,
}

/// Uncontrolled steady state: pseudo-time marching for Navier-Stokes, a
/// direct saddle-point solve for Stokes.
pub fn steady_state<T: Real>(model: &FlowModel<T>, kind: ShapeKind, opts: &SteadyOptions<T>) -> Result<SteadyState<T>> {
    match kind {
        ShapeKind::StokesSteady => stokes(model, opts),
        ShapeKind::NavierStokesSteady => navier_stokes(model, opts),
    }
}

fn zero_controls<T: Real>(model: &FlowModel<T>) -> Vec<T> {
    vec![T::zero(); model.n_controls()]
}

fn navier_stokes<T: Real>(model: &FlowModel<T>, opts: &SteadyOptions<T>) -> Result<SteadyState<T>> {
    let grid = model.grid();
    let h = grid.hx::<T>().min(grid.hy::<T>());
    let dt = opts
        .pseudo_dt
        .unwrap_or_else(|| T::lit(0.5) * h / model.walls().max_speed().max(T::one()));
    let stepper = model.stepper(dt)?;
    let u0 = zero_controls(model);

    let mut state = stokes(model, opts)?.state;
    let mut residual = norm_inf(&model.rhs(&state.velocity, &u0)?);
    let mut steps = 0;
    let every = opts.check_every.max(1);
    while residual >= opts.tol {
        if steps >= opts.max_steps {
            return Err(Error::NonConvergence {
                what: "steady Navier-Stokes march",
                residual: residual.to_f64_lossy(),
                iterations: steps,
            });
        }
        for _ in 0..every {
            state = stepper.step(&state, &u0)?;
        }
        steps += every;
        residual = norm_inf(&model.rhs(&state.velocity, &u0)?);
        if steps % (every * 200) == 0 {
            debug!(steps, residual = residual.to_f64_lossy(), "steady march");
        }
    }
    let forcing = model.momentum(&state.velocity, &u0, true)?;
    Ok(SteadyState {
        state: StaggeredState {
            pressure: model.gradient_potential(&forcing),
            velocity: state.velocity,
            time: T::zero(),
        },
        residual,
        iterations: steps,
    })
}

/// Solves `ν A y + C p = ν a`, `Cᵀ y = 0` by conjugate gradients on the
/// pressure Schur complement `Cᵀ A⁻¹ C` with exact inner solves.
fn stokes<T: Real>(model: &FlowModel<T>, opts: &SteadyOptions<T>) -> Result<SteadyState<T>> {
    let ops = model.operators();
    let a_inv = BandedCholesky::factor(&ops.laplacian)?;
    let schur = |q: &[T]| -> Vec<T> {
        let mut z = ops.gradient.matvec(q);
        a_inv.solve_in_place(&mut z);
        ops.gradient.tr_matvec(&z)
    };

    let b = ops.gradient.tr_matvec(&a_inv.solve(&ops.boundary));
    let n = b.len();
    let mut q = vec![T::zero(); n];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let stop = (T::epsilon() * T::lit(10.0)).powi(2) * rr.max(T::min_positive_value());
    let mut iterations = 0;
    let max_iter = 20 * n;
    while rr > stop && iterations < max_iter {
        let sd = schur(&d);
        let alpha = rr / dot(&d, &sd);
        axpy(alpha, &d, &mut q);
        axpy(-alpha, &sd, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (di, &ri) in d.iter_mut().zip(&r) {
            *di = ri + beta * *di;
        }
        iterations += 1;
    }

    let mut y = ops.boundary.clone();
    axpy(-T::one(), &ops.gradient.matvec(&q), &mut y);
    a_inv.solve_in_place(&mut y);

    let u0 = zero_controls(model);
    let residual = norm_inf(&model.stokes_rhs(&y, &u0)?);
    if !(residual < opts.tol) {
        return Err(Error::NonConvergence {
            what: "Stokes Schur-complement solve",
            residual: residual.to_f64_lossy(),
            iterations,
        });
    }
    let q0 = q[0];
    let pressure = q.iter().map(|&x| model.nu() * (x - q0)).collect();
    Ok(SteadyState {
        state: StaggeredState {
            velocity: y,
            pressure,
            time: T::zero(),
        },
        residual,
        iterations,
    })
}
