//! Velocity snapshots, their mean flow and the mean-subtracted snapshot
//! matrix.

use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::{StaggeredState, Trajectory};
use crate::grid::CavityGrid;
use crate::io::{TextReader, TextWriter};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const SNAPS_TAG: &str = "HJBPOD-SNAPS";

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet<T> {
    grid: CavityGrid,
    times: Vec<T>,
    mean: Vec<T>,
    fluct: Matrix<T>,
}

impl<T: Real> SnapshotSet<T> {
    /// Mean-subtracts the velocity parts of `states` (pressure is dropped).
    pub fn from_states(grid: CavityGrid, states: &[&StaggeredState<T>]) -> Result<Self> {
        let n = states.len();
        if n < 2 {
            return Err(Error::param("snapshots", "need at least two snapshots"));
        }
        let m = grid.n_velocity();
        let mut mean = vec![T::zero(); m];
        for s in states {
            grid.check_velocity_len(s.velocity.len())?;
            for (acc, &v) in mean.iter_mut().zip(&s.velocity) {
                *acc += v;
            }
        }
        let inv_n = T::one() / T::from_usize_lossy(n);
        mean.iter_mut().for_each(|x| *x *= inv_n);
        let mut fluct = Matrix::zeros(m, n);
        for (j, s) in states.iter().enumerate() {
            for (dst, (&v, &mu)) in fluct.col_mut(j).iter_mut().zip(s.velocity.iter().zip(&mean)) {
                *dst = v - mu;
            }
        }
        Ok(Self {
            grid,
            times: states.iter().map(|s| s.time).collect(),
            mean,
            fluct,
        })
    }

    /// Selects the states of `trajectory` at the requested `times`.
    pub fn collect(grid: CavityGrid, trajectory: &Trajectory<T>, times: &[T]) -> Result<Self> {
        let states = times
            .iter()
            .map(|&t| {
                let tol = T::lit(1e-9) * t.abs().max(T::one());
                trajectory
                    .at_time(t, tol)
                    .ok_or_else(|| Error::MissingTime(t.to_f64_lossy()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_states(grid, &states)
    }

    pub fn grid(&self) -> &CavityGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Mean flow `ȳ`.
    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// `Y = [y₁ - ȳ, ..., yₙ - ȳ]`.
    pub fn fluctuations(&self) -> &Matrix<T> {
        &self.fluct
    }

    /// Original snapshot `yⱼ = ȳ + Y[:, j]`.
    pub fn snapshot(&self, j: usize) -> Vec<T> {
        self.mean.iter().zip(self.fluct.col(j)).map(|(&m, &f)| m + f).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = TextWriter::new(
            SNAPS_TAG,
            &[
                self.grid.nx().to_string(),
                self.grid.ny().to_string(),
                self.len().to_string(),
            ],
        );
        w.values(&self.times).values(&self.mean);
        for c in self.fluct.columns() {
            w.values(c);
        }
        w.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = TextReader::open(path, SNAPS_TAG)?;
        let grid = CavityGrid::new(r.header_field(0, "nx")?, r.header_field(1, "ny")?)?;
        let n: usize = r.header_field(2, "n")?;
        let m = grid.n_velocity();
        let times = r.values(n)?;
        let mean = r.values(m)?;
        let mut cols = Vec::with_capacity(n);
        for _ in 0..n {
            cols.push(r.values(m)?);
        }
        r.finish()?;
        Ok(Self {
            grid,
            times,
            mean,
            fluct: Matrix::from_columns(m, &cols)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(grid: &CavityGrid, t: f64, scale: f64) -> StaggeredState<f64> {
        StaggeredState {
            velocity: (0..grid.n_velocity())
                .map(|k| scale * ((k as f64) * 0.3 + t).sin())
                .collect(),
            pressure: vec![0.0; grid.n_cells()],
            time: t,
        }
    }

    #[test]
    fn identical_snapshots_have_zero_fluctuation() {
        let g = CavityGrid::new(4, 4).unwrap();
        let a = state(&g, 0.0, 1.0);
        let set = SnapshotSet::from_states(g, &[&a, &a.clone()]).unwrap();
        assert_eq!(set.mean(), &a.velocity[..]);
        assert_eq!(set.fluctuations().max_abs(), 0.0);
    }

    #[test]
    fn columns_sum_to_zero_and_match_definition() {
        let g = CavityGrid::new(5, 4).unwrap();
        let states: Vec<_> = (0..7).map(|j| state(&g, j as f64 * 0.4, 1.0 + j as f64)).collect();
        let refs: Vec<_> = states.iter().collect();
        let set = SnapshotSet::from_states(g, &refs).unwrap();
        let ymax = set.mean().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..g.n_velocity() {
            let s: f64 = (0..7).map(|j| set.fluctuations()[(i, j)]).sum();
            assert!(s.abs() <= 1e-12 * 7.0 * ymax.max(1.0));
        }
        let col3: Vec<f64> = states[3].velocity.iter().zip(set.mean()).map(|(a, b)| a - b).collect();
        assert_eq!(set.fluctuations().col(3), &col3[..]);
    }

    #[test]
    fn mean_subtraction_is_idempotent() {
        let g = CavityGrid::new(4, 5).unwrap();
        let states: Vec<_> = (0..5).map(|j| state(&g, j as f64, 2.0)).collect();
        let refs: Vec<_> = states.iter().collect();
        let set = SnapshotSet::from_states(g, &refs).unwrap();
        let again: Vec<_> = (0..5)
            .map(|j| StaggeredState {
                velocity: set.fluctuations().col(j).to_vec(),
                pressure: vec![0.0; g.n_cells()],
                time: j as f64,
            })
            .collect();
        let refs2: Vec<_> = again.iter().collect();
        let set2 = SnapshotSet::from_states(g, &refs2).unwrap();
        assert!(set2.mean().iter().all(|m| m.abs() <= 1e-12 * 2.0));
    }

    #[test]
    fn missing_time_is_named() {
        let g = CavityGrid::new(4, 4).unwrap();
        let traj = Trajectory {
            states: vec![state(&g, 0.0, 1.0), state(&g, 0.1, 1.0)],
            stride: 1,
        };
        match SnapshotSet::collect(g, &traj, &[0.0, 0.3]) {
            Err(Error::MissingTime(t)) => assert_eq!(t, 0.3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_single_snapshot() {
        let g = CavityGrid::new(4, 4).unwrap();
        let a = state(&g, 0.0, 1.0);
        assert!(SnapshotSet::from_states(g, &[&a]).is_err());
    }
}
