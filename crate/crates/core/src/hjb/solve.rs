use rayon::prelude::*;
use tracing::{debug, info, warn};

use super::grid::{Cell, ValueGrid};
use super::ControlSystem;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Node update order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Two buffers; every node reads the previous iterate. Thread-count
    /// independent results.
    #[default]
    Jacobi,
    /// In-place lexicographic updates, single thread.
    GaussSeidel,
}

#[derive(Clone, Debug)]
pub struct SolveOptions<T> {
    pub tol: T,
    pub max_iters: usize,
    pub threads: usize,
    pub sweep: SweepMode,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-6),
            max_iters: 100_000,
            threads: 1,
            sweep: SweepMode::Jacobi,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub iterations: usize,
    pub residual: T,
    pub converged: bool,
    /// Sup-norm change of each sweep.
    pub residuals: Vec<T>,
    /// Largest ratio of successive residuals seen.
    pub worst_contraction: T,
}

/// Arrival cells and scaled costs `h L(xᵢ, u)` for every (node, control).
pub(crate) struct Transitions<T> {
    pub n_controls: usize,
    pub bases: Vec<usize>,
    pub fracs: Vec<T>,
    pub costs: Vec<T>,
}

impl<T: Real> Transitions<T> {
    pub fn build<S: ControlSystem<T>>(grid: &ValueGrid<T>, system: &S, controls: &[T]) -> Self {
        let d = grid.dim();
        let nu = controls.len();
        let n = grid.len();
        let h = grid.time_step();
        let mut bases = vec![0usize; n * nu];
        let mut fracs = vec![T::zero(); n * nu * d];
        let mut costs = vec![T::zero(); n * nu];
        bases
            .par_chunks_mut(nu)
            .zip(fracs.par_chunks_mut(nu * d))
            .zip(costs.par_chunks_mut(nu))
            .enumerate()
            .for_each(|(i, ((b, fr), c))| {
                let mut x = vec![T::zero(); d];
                let mut dx = vec![T::zero(); d];
                let mut cell = Cell::default();
                grid.node(i, &mut x);
                for (j, &u) in controls.iter().enumerate() {
                    system.dynamics(&x, u, &mut dx);
                    for a in 0..d {
                        dx[a] = x[a] + h * dx[a];
                    }
                    grid.locate(&dx, &mut cell);
                    b[j] = cell.base;
                    fr[j * d..(j + 1) * d].copy_from_slice(&cell.frac);
                    c[j] = h * system.running_cost(&x, u);
                }
            });
        Self {
            n_controls: nu,
            bases,
            fracs,
            costs,
        }
    }

    /// One-step values `(1 - λh) I[V](arrival) + h L` at node `i`.
    pub fn candidates(&self, grid: &ValueGrid<T>, values: &[T], i: usize, out: &mut Vec<T>) {
        let d = grid.dim();
        let beta = grid.contraction();
        let mut cell = Cell {
            base: 0,
            frac: vec![T::zero(); d],
        };
        out.clear();
        for j in 0..self.n_controls {
            let slot = i * self.n_controls + j;
            cell.base = self.bases[slot];
            cell.frac.copy_from_slice(&self.fracs[slot * d..(slot + 1) * d]);
            out.push(beta * grid.eval_cell(values, &cell) + self.costs[slot]);
        }
    }

    fn update(&self, grid: &ValueGrid<T>, values: &[T], i: usize, cell: &mut Cell<T>) -> T {
        let d = grid.dim();
        let beta = grid.contraction();
        let mut best = T::infinity();
        for j in 0..self.n_controls {
            let slot = i * self.n_controls + j;
            cell.base = self.bases[slot];
            cell.frac.copy_from_slice(&self.fracs[slot * d..(slot + 1) * d]);
            let q = beta * grid.eval_cell(values, cell) + self.costs[slot];
            if q < best {
                best = q;
            }
        }
        best
    }
}

pub(crate) fn check_controls<T: Real>(controls: &[T]) -> Result<()> {
    if controls.is_empty() {
        return Err(Error::Empty("control set"));
    }
    if controls.iter().any(|u| !u.is_finite()) {
        return Err(Error::param("controls", "control values must be finite"));
    }
    Ok(())
}

const CHUNK: usize = 256;

impl<T: Real> ValueGrid<T> {
    /// Value iteration from the current node values. Hitting `max_iters`
    /// is reported through `converged = false`, not as an error.
    pub fn solve<S: ControlSystem<T>>(
        &mut self,
        system: &S,
        controls: &[T],
        opts: &SolveOptions<T>,
    ) -> Result<SolveReport<T>> {
        check_controls(controls)?;
        if system.state_dim() != self.dim() {
            return Err(Error::dims("value grid", self.dim(), system.state_dim()));
        }
        if opts.threads == 0 {
            return Err(Error::param("threads", "need at least one thread"));
        }
        if opts.sweep == SweepMode::GaussSeidel && opts.threads > 1 {
            return Err(Error::param("threads", "Gauss-Seidel sweeps run on one thread"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::param("threads", e.to_string()))?;
        pool.install(|| self.iterate(system, controls, opts))
    }

    fn iterate<S: ControlSystem<T>>(
        &mut self,
        system: &S,
        controls: &[T],
        opts: &SolveOptions<T>,
    ) -> Result<SolveReport<T>> {
        let trans = Transitions::build(self, system, controls);
        info!(nodes = self.len(), controls = controls.len(), "value iteration");
        let beta = self.contraction();
        let mut residuals = Vec::new();
        let mut worst = T::zero();
        let mut next = self.values().to_vec();
        let mut converged = false;
        let d = self.dim();

        for iter in 1..=opts.max_iters {
            let residual = match opts.sweep {
                SweepMode::Jacobi => {
                    let current = self.values();
                    next.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                        let mut cell = Cell {
                            base: 0,
                            frac: vec![T::zero(); d],
                        };
                        for (o, slot) in chunk.iter_mut().enumerate() {
                            *slot = trans.update(self, current, c * CHUNK + o, &mut cell);
                        }
                    });
                    let r = current
                        .iter()
                        .zip(&next)
                        .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
                    std::mem::swap(self.values_mut_vec(), &mut next);
                    r
                }
                SweepMode::GaussSeidel => {
                    let mut values = std::mem::take(self.values_mut_vec());
                    let mut cell = Cell {
                        base: 0,
                        frac: vec![T::zero(); d],
                    };
                    let mut r = T::zero();
                    for i in 0..values.len() {
                        let v = trans.update(self, &values, i, &mut cell);
                        r = r.max((v - values[i]).abs());
                        values[i] = v;
                    }
                    *self.values_mut_vec() = values;
                    r
                }
            };
            if !residual.is_finite() {
                return Err(Error::BlowUp { time: iter as f64 });
            }
            if let Some(&prev) = residuals.last() {
                if prev > T::zero() {
                    let ratio: T = residual / prev;
                    worst = worst.max(ratio);
                    if ratio > beta * (T::one() + T::lit(1e-9)) && residual > T::lit(1e-13) {
                        warn!(iter, ratio = ratio.to_f64_lossy(), "sweep did not contract");
                    }
                }
            }
            residuals.push(residual);
            if iter % 500 == 0 {
                debug!(iter, residual = residual.to_f64_lossy(), "value iteration");
            }
            if residual < opts.tol {
                converged = true;
                break;
            }
        }
        let residual = residuals.last().copied().unwrap_or(T::zero());
        if converged {
            info!(
                iterations = residuals.len(),
                residual = residual.to_f64_lossy(),
                "value iteration converged"
            );
        } else {
            warn!(
                iterations = residuals.len(),
                residual = residual.to_f64_lossy(),
                "value iteration hit max_iters"
            );
        }
        Ok(SolveReport {
            iterations: residuals.len(),
            residual,
            converged,
            residuals,
            worst_contraction: worst,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::FnSystem;

    fn toy_1d() -> impl ControlSystem<f64> {
        FnSystem::new(
            1,
            |_: &[f64], u: f64, dx: &mut [f64]| dx[0] = u,
            |x: &[f64], _u: f64| x[0] * x[0],
        )
    }

    #[test]
    fn constant_cost_gives_c_over_lambda() {
        let sys = FnSystem::new(
            2,
            |x: &[f64], u: f64, dx: &mut [f64]| {
                dx[0] = x[1] + u;
                dx[1] = -x[0];
            },
            |_: &[f64], _: f64| 0.7,
        );
        let mut g = ValueGrid::new(&[(-1.0, 1.0), (-1.0, 1.0)], 0.25, 0.1, 2.0).unwrap();
        let opts = SolveOptions {
            tol: 1e-13,
            ..SolveOptions::default()
        };
        let rep = g.solve(&sys, &[-1.0, 0.0, 1.0], &opts).unwrap();
        assert!(rep.converged);
        for &v in g.values() {
            assert!((v - 0.35).abs() < 1e-10);
        }
    }

    #[test]
    fn sweeps_contract_and_grow_monotonically() {
        let sys = toy_1d();
        let mut g = ValueGrid::new(&[(-2.0, 2.0)], 0.1, 0.05, 1.0).unwrap();
        let mut prev = g.values().to_vec();
        let opts = SolveOptions {
            max_iters: 1,
            ..SolveOptions::default()
        };
        let beta = g.contraction();
        let mut last_res = f64::INFINITY;
        for _ in 0..200 {
            let rep = g.solve(&sys, &[-1.0, 0.0, 1.0], &opts).unwrap();
            assert!(rep.residual <= beta * last_res * (1.0 + 1e-12));
            last_res = rep.residual;
            for (a, b) in prev.iter().zip(g.values()) {
                assert!(b >= a);
                assert!(*b <= 4.0 + 1e-12);
            }
            prev = g.values().to_vec();
        }
    }

    #[test]
    fn gauss_seidel_reaches_the_jacobi_fixed_point() {
        let sys = toy_1d();
        let opts = SolveOptions {
            tol: 1e-11,
            ..SolveOptions::default()
        };
        let mut jac = ValueGrid::new(&[(-2.0, 2.0)], 0.1, 0.05, 1.0).unwrap();
        let mut gs = jac.clone();
        let rj = jac.solve(&sys, &[-1.0, 0.0, 1.0], &opts).unwrap();
        let rg = gs
            .solve(
                &sys,
                &[-1.0, 0.0, 1.0],
                &SolveOptions {
                    sweep: SweepMode::GaussSeidel,
                    ..opts.clone()
                },
            )
            .unwrap();
        assert!(rj.converged && rg.converged);
        assert!(rg.iterations <= rj.iterations);
        for (a, b) in jac.values().iter().zip(gs.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn thread_count_does_not_change_values() {
        let sys = FnSystem::new(
            2,
            |x: &[f64], u: f64, dx: &mut [f64]| {
                dx[0] = -0.3 * x[0] + x[1] * x[1] + u;
                dx[1] = -x[0] * x[1] - 0.1 * x[1];
            },
            |x: &[f64], u: f64| x[0] * x[0] + x[1] * x[1] + 0.01 * u * u,
        );
        let mut a = ValueGrid::new(&[(-1.0, 1.0), (-1.0, 1.0)], 0.05, 0.04, 1.0).unwrap();
        let mut b = a.clone();
        let opts = SolveOptions::default();
        a.solve(&sys, &[-1.0, 0.0, 1.0], &opts).unwrap();
        b.solve(&sys, &[-1.0, 0.0, 1.0], &SolveOptions { threads: 4, ..opts })
            .unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn max_iters_is_not_fatal() {
        let sys = toy_1d();
        let mut g = ValueGrid::new(&[(-2.0, 2.0)], 0.1, 0.01, 1.0).unwrap();
        let rep = g
            .solve(
                &sys,
                &[-1.0, 0.0, 1.0],
                &SolveOptions {
                    max_iters: 3,
                    ..SolveOptions::default()
                },
            )
            .unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert!(rep.residual > 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = toy_1d();
        let mut g = ValueGrid::new(&[(-1.0, 1.0), (-1.0, 1.0)], 0.5, 0.1, 1.0).unwrap();
        assert!(g.solve(&sys, &[0.0], &SolveOptions::default()).is_err());
        let mut g1 = ValueGrid::new(&[(-1.0, 1.0)], 0.5, 0.1, 1.0).unwrap();
        assert!(g1.solve(&sys, &[], &SolveOptions::default()).is_err());
        let gs_threads = SolveOptions {
            sweep: SweepMode::GaussSeidel,
            threads: 2,
            ..SolveOptions::default()
        };
        assert!(g1.solve(&sys, &[0.0], &gs_threads).is_err());
    }
}
