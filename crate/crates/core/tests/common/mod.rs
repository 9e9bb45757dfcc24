#![allow(dead_code)]

use hjbpod::flow::{FlowModel, StaggeredState, Walls};
use hjbpod::snapshot::SnapshotSet;
use hjbpod::CavityGrid;

/// Uncontrolled lid-driven spin-up from rest on an `n x n` grid with
/// `count` snapshots at `t_j = j * horizon / count`.
pub fn spin_up(n: usize, count: usize, horizon: f64) -> (FlowModel<f64>, SnapshotSet<f64>) {
    let grid = CavityGrid::new(n, n).unwrap();
    let model = FlowModel::new(grid, Walls::lid_driven(1.0), 0.01, 0.5).unwrap();
    let dt = 0.01;
    let steps = (horizon / dt).round() as usize;
    let stride = steps / count;
    let traj = model
        .stepper(dt)
        .unwrap()
        .simulate(&StaggeredState::rest(&grid), |_| vec![], horizon, stride)
        .unwrap();
    let states: Vec<&StaggeredState<f64>> = traj.snapshots().collect();
    assert_eq!(states.len(), count);
    let set = SnapshotSet::from_states(grid, &states).unwrap();
    (model, set)
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
