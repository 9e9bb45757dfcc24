use std::path::Path;

use rayon::prelude::*;

use super::grid::{Cell, ValueGrid};
use super::solve::{check_controls, Transitions};
use super::ControlSystem;
use crate::error::{Error, Result};
use crate::io::{TextReader, TextWriter};
use crate::scalar::Real;

pub const POLICY_TAG: &str = "HJBPOD-POLICY";

/// Index of the minimizing candidate. Candidates within a relative
/// `1e-12` of the minimum count as tied; among ties a zero control wins,
/// otherwise the lowest index.
pub(crate) fn argmin_with_ties<T: Real>(candidates: &[T], controls: &[T]) -> usize {
    let best = candidates.iter().copied().fold(T::infinity(), T::min);
    let slack = T::lit(1e-12) * best.abs().max(T::one());
    let tied = |j: &usize| candidates[*j] <= best + slack;
    (0..candidates.len())
        .filter(tied)
        .find(|&j| controls[j] == T::zero())
        .or_else(|| (0..candidates.len()).find(tied))
        .unwrap_or(0)
}

/// Argmin control index per node of a converged value grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackPolicy<T> {
    bounds: Vec<(T, T)>,
    k: T,
    controls: Vec<T>,
    indices: Vec<usize>,
    counts: Vec<usize>,
}

impl<T: Real> FeedbackPolicy<T> {
    pub fn extract<S: ControlSystem<T>>(grid: &ValueGrid<T>, system: &S, controls: &[T]) -> Result<Self> {
        check_controls(controls)?;
        if system.state_dim() != grid.dim() {
            return Err(Error::dims("policy", grid.dim(), system.state_dim()));
        }
        let trans = Transitions::build(grid, system, controls);
        let indices: Vec<usize> = (0..grid.len())
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                trans.candidates(grid, grid.values(), i, buf);
                argmin_with_ties(buf, controls)
            })
            .collect();
        Ok(Self::from_parts(grid, controls.to_vec(), indices))
    }

    fn from_parts(grid: &ValueGrid<T>, controls: Vec<T>, indices: Vec<usize>) -> Self {
        Self {
            bounds: grid.bounds(),
            k: grid.spacing(),
            controls,
            indices,
            counts: grid.counts().to_vec(),
        }
    }

    pub fn controls(&self) -> &[T] {
        &self.controls
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn control_at_node(&self, node: usize) -> T {
        self.controls[self.indices[node]]
    }

    /// Table fallback: control of the node nearest to the clamped `x`.
    pub fn nearest(&self, x: &[T]) -> T {
        let counts = &self.counts;
        let mut node = 0;
        for (a, &(lo, hi)) in self.bounds.iter().enumerate() {
            let xa = x[a].max(lo).min(hi);
            let i = ((xa - lo) / self.k).round().to_usize().unwrap_or(0).min(counts[a] - 1);
            node = node * counts[a] + i;
        }
        self.control_at_node(node)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = TextWriter::new(
            POLICY_TAG,
            &[
                self.bounds.len().to_string(),
                format!("{:e}", self.k),
                self.controls.len().to_string(),
            ],
        );
        for &(lo, hi) in &self.bounds {
            w.values(&[lo, hi]);
        }
        w.values(&self.controls);
        w.indices(&self.indices);
        w.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = TextReader::open(path, POLICY_TAG)?;
        let dim: usize = r.header_field(0, "l")?;
        let k: T = r.header_field(1, "k")?;
        let nu: usize = r.header_field(2, "controls")?;
        let mut bounds = Vec::with_capacity(dim);
        for _ in 0..dim {
            let b: Vec<T> = r.values(2)?;
            bounds.push((b[0], b[1]));
        }
        let controls: Vec<T> = r.values(nu)?;
        let layout = ValueGrid::new(&bounds, k, T::lit(0.5), T::one())?;
        let indices: Vec<usize> = r.values(layout.len())?;
        let counts = layout.counts().to_vec();
        if indices.iter().any(|&i| i >= nu) {
            return Err(r.format("control index out of range"));
        }
        r.finish()?;
        Ok(Self {
            bounds,
            k,
            controls,
            indices,
            counts,
        })
    }
}

/// Online argmin at arbitrary states using the interpolated value function.
pub struct OnlineFeedback<'a, T, S> {
    grid: &'a ValueGrid<T>,
    system: &'a S,
    controls: &'a [T],
}

impl<'a, T: Real, S: ControlSystem<T>> OnlineFeedback<'a, T, S> {
    pub fn new(grid: &'a ValueGrid<T>, system: &'a S, controls: &'a [T]) -> Result<Self> {
        check_controls(controls)?;
        if system.state_dim() != grid.dim() {
            return Err(Error::dims("feedback", grid.dim(), system.state_dim()));
        }
        Ok(Self { grid, system, controls })
    }

    pub fn controls(&self) -> &[T] {
        self.controls
    }

    /// One-step values for every control at the clamped `x`.
    pub fn candidates(&self, x: &[T]) -> Vec<T> {
        let d = self.grid.dim();
        let h = self.grid.time_step();
        let beta = self.grid.contraction();
        let mut xc = vec![T::zero(); d];
        self.grid.clamp(x, &mut xc);
        let mut dx = vec![T::zero(); d];
        let mut cell = Cell::default();
        self.controls
            .iter()
            .map(|&u| {
                self.system.dynamics(&xc, u, &mut dx);
                for a in 0..d {
                    dx[a] = xc[a] + h * dx[a];
                }
                self.grid.locate(&dx, &mut cell);
                beta * self.grid.eval_cell(self.grid.values(), &cell) + h * self.system.running_cost(&xc, u)
            })
            .collect()
    }

    pub fn index(&self, x: &[T]) -> usize {
        argmin_with_ties(&self.candidates(x), self.controls)
    }

    pub fn control(&self, x: &[T]) -> T {
        self.controls[self.index(x)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::{FnSystem, SolveOptions};

    #[test]
    fn tie_rule_prefers_zero_then_lowest() {
        assert_eq!(argmin_with_ties(&[1.0, 1.0, 1.0], &[-1.0, 0.0, 1.0]), 1);
        assert_eq!(argmin_with_ties(&[1.0, 2.0, 1.0], &[-1.0, 0.0, 1.0]), 0);
        assert_eq!(argmin_with_ties(&[3.0, 2.0, 1.0], &[-1.0, 0.0, 1.0]), 2);
        assert_eq!(argmin_with_ties(&[1.0, 1.0 + 1e-15, 2.0], &[-1.0, 0.0, 1.0]), 1);
    }

    #[test]
    fn control_blind_problem_yields_zero_policy() {
        let sys = FnSystem::new(
            2,
            |x: &[f64], _u: f64, dx: &mut [f64]| {
                dx[0] = -x[1];
                dx[1] = x[0];
            },
            |x: &[f64], _u: f64| x[0] * x[0],
        );
        let mut g = ValueGrid::new(&[(-1.0, 1.0), (-1.0, 1.0)], 0.25, 0.1, 1.0).unwrap();
        g.solve(&sys, &[-1.0, 0.0, 1.0], &SolveOptions::default()).unwrap();
        let pol = FeedbackPolicy::extract(&g, &sys, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(pol.indices().iter().all(|&i| i == 1));
    }

    #[test]
    fn online_feedback_matches_table_at_nodes_and_clamps() {
        let sys = FnSystem::new(
            2,
            |x: &[f64], u: f64, dx: &mut [f64]| {
                dx[0] = x[1];
                dx[1] = -0.5 * x[0] + u;
            },
            |x: &[f64], u: f64| x[0] * x[0] + x[1] * x[1] + 0.1 * u * u,
        );
        let u = [-1.0, 0.0, 1.0];
        let mut g = ValueGrid::new(&[(-1.0, 1.0), (-1.0, 1.0)], 0.1, 0.04, 1.0).unwrap();
        g.solve(&sys, &u, &SolveOptions::default()).unwrap();
        let pol = FeedbackPolicy::extract(&g, &sys, &u).unwrap();
        let fb = OnlineFeedback::new(&g, &sys, &u).unwrap();
        for i in 0..g.len() {
            let x = g.node_vec(i);
            assert_eq!(fb.control(&x), pol.control_at_node(i));
            assert_eq!(pol.nearest(&x), pol.control_at_node(i));
        }
        assert_eq!(fb.control(&[5.0, -7.0]), fb.control(&[1.0, -1.0]));
    }

    #[test]
    fn policy_roundtrip_is_exact() {
        let sys = FnSystem::new(
            1,
            |_: &[f64], u: f64, dx: &mut [f64]| dx[0] = u,
            |x: &[f64], _| x[0] * x[0],
        );
        let mut g = ValueGrid::new(&[(-1.0, 1.0)], 0.1, 0.05, 1.0).unwrap();
        g.solve(&sys, &[-1.0, 0.0, 1.0], &SolveOptions::default()).unwrap();
        let pol = FeedbackPolicy::extract(&g, &sys, &[-1.0, 0.0, 1.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let pp = dir.path().join("policy.txt");
        let vp = dir.path().join("value.txt");
        pol.save(&pp).unwrap();
        g.save(&vp).unwrap();
        let back: FeedbackPolicy<f64> = FeedbackPolicy::load(&pp).unwrap();
        assert_eq!(back, pol);
        assert_eq!(ValueGrid::<f64>::load(&vp).unwrap(), g);
    }
}
