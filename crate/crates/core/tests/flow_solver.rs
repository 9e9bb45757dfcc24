use hjbpod::flow::{steady_state, FlowModel, ShapeKind, StaggeredState, SteadyOptions, Walls};
use hjbpod::{CavityGrid, Error};
use proptest::prelude::*;

fn cavity(n: usize, lid: f64) -> FlowModel<f64> {
    let grid = CavityGrid::new(n, n).unwrap();
    FlowModel::new(grid, Walls::lid_driven(lid), 0.01, 0.5).unwrap()
}

fn pseudo_random(len: usize, seed: f64) -> Vec<f64> {
    (0..len)
        .map(|k| ((k as f64 + 1.0) * 12.9898 + seed * 78.233).sin() * 43758.5453 % 1.0)
        .collect()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn staggered_counts() {
    let g = CavityGrid::new(4, 4).unwrap();
    assert_eq!((g.n_u(), g.n_v(), g.n_cells()), (12, 12, 16));
    assert_eq!(CavityGrid::new(64, 64).unwrap().hx::<f64>(), 1.0 / 64.0);
    assert!(matches!(CavityGrid::new(3, 64), Err(Error::InvalidGrid(_))));
}

#[test]
fn laplacian_is_symmetric_positive_definite() {
    let model = cavity(8, 1.0);
    let a = model.operators().laplacian.to_dense();
    let n = a.nrows();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    assert!(asym <= 1e-12 * a.max_abs());
    // Cholesky of the dense copy as a definiteness check
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        assert!(d > 0.0, "pivot {j} not positive");
        l[j * n + j] = d.sqrt();
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / l[j * n + j];
        }
    }
}

#[test]
fn divergence_is_negative_gradient_transpose() {
    let model = cavity(7, 1.0);
    let ops = model.operators();
    let d = ops.divergence.to_dense();
    let c = ops.gradient.to_dense();
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            assert!((d[(i, j)] + c[(j, i)]).abs() <= 1e-12);
        }
    }
}

#[test]
fn boundary_vector_only_touches_lid_rows() {
    let model = cavity(8, 1.0);
    let g = *model.grid();
    let a = &model.operators().boundary;
    for (k, &v) in a.iter().enumerate() {
        let (_, y) = g.face_position::<f64>(k);
        let next_to_lid = k < g.n_u() && y > 1.0 - g.hy::<f64>();
        assert_eq!(v != 0.0, next_to_lid, "row {k}");
    }
    let at_rest = FlowModel::new(g, Walls::at_rest(), 0.01, 0.5).unwrap();
    assert!(at_rest.operators().boundary.iter().all(|&v| v == 0.0));
}

#[test]
fn every_step_is_divergence_free() {
    let model = cavity(16, 1.0);
    let st = model.stepper(0.01).unwrap();
    let mut y = StaggeredState::rest(model.grid());
    for _ in 0..60 {
        y = st.step(&y, &[]).unwrap();
        let div = norm_inf(&model.divergence(&y.velocity));
        assert!(div <= 1e-8 * norm_inf(&y.velocity), "divergence {div}");
    }
}

#[test]
fn rest_is_invariant_without_lid() {
    let model = cavity(8, 0.0);
    let st = model.stepper(0.01).unwrap();
    let mut y = StaggeredState::rest(model.grid());
    for _ in 0..10 {
        y = st.step(&y, &[]).unwrap();
    }
    assert!(y.velocity.iter().all(|&v| v == 0.0));
}

#[test]
fn kinetic_energy_decays_without_lid() {
    let model = cavity(12, 0.0);
    let g = *model.grid();
    let y0 = StaggeredState {
        velocity: model.project_divergence_free(&pseudo_random(g.n_velocity(), 0.3)),
        pressure: vec![0.0; g.n_cells()],
        time: 0.0,
    };
    let st = model.stepper(0.01).unwrap();
    for advect in [false, true] {
        let mut y = y0.clone();
        let mut e = y.kinetic_energy(&g);
        for _ in 0..100 {
            y = if advect {
                st.step(&y, &[]).unwrap()
            } else {
                st.stokes_step(&y, &[]).unwrap()
            };
            let e_next = y.kinetic_energy(&g);
            assert!(e_next <= e * (1.0 + 1e-13), "energy grew: {e} -> {e_next}");
            e = e_next;
        }
        assert!(e < 0.9 * y0.kinetic_energy(&g));
    }
}

#[test]
fn steady_states_are_fixed_points() {
    let model = cavity(16, 1.0);
    let opts = SteadyOptions::default();
    let ns = steady_state(&model, ShapeKind::NavierStokesSteady, &opts).unwrap();
    assert!(ns.residual < 1e-8);
    let rhs = model.rhs(&ns.state.velocity, &[]).unwrap();
    assert!(norm_inf(&rhs) < 1e-8);
    let st = model.stepper(0.01).unwrap();
    let next = st.step(&ns.state, &[]).unwrap();
    assert!(linf(&next.velocity, &ns.state.velocity) <= 10.0 * opts.tol);

    let stokes = steady_state(&model, ShapeKind::StokesSteady, &opts).unwrap();
    assert!(norm_inf(&model.stokes_rhs(&stokes.state.velocity, &[]).unwrap()) < 1e-8);
    let next = st.stokes_step(&stokes.state, &[]).unwrap();
    assert!(linf(&next.velocity, &stokes.state.velocity) <= 10.0 * opts.tol);
    assert!(linf(&stokes.state.velocity, &ns.state.velocity) > 1e-3);

    let still = cavity(16, 0.0);
    let zero = steady_state(&still, ShapeKind::StokesSteady, &opts).unwrap();
    assert!(norm_inf(&zero.state.velocity) < 1e-14);
}

#[test]
fn spin_up_approaches_the_steady_state() {
    let model = cavity(12, 1.0);
    let ns = steady_state(&model, ShapeKind::NavierStokesSteady, &SteadyOptions::default()).unwrap();
    let st = model.stepper(0.02).unwrap();
    let traj = st
        .simulate(&StaggeredState::rest(model.grid()), |_| vec![], 30.0, 100)
        .unwrap();
    let dist: Vec<f64> = traj
        .snapshots()
        .map(|s| linf(&s.velocity, &ns.state.velocity))
        .collect();
    assert_eq!(dist.len(), 15);
    // monotone after the transient until the steady tolerance floor
    for w in dist[2..].windows(2).filter(|w| w[1] > 1e-6) {
        assert!(w[1] < w[0], "distance not decreasing: {dist:?}");
    }
    assert!(dist[14] < 1e-6);
}

#[test]
fn simulate_is_deterministic_and_handles_zero_horizon() {
    let model = cavity(10, 1.0);
    let st = model.stepper(0.01).unwrap();
    let y0 = StaggeredState::rest(model.grid());
    let empty = st.simulate(&y0, |_| vec![], 0.0, 1).unwrap();
    assert_eq!(empty.states, vec![y0.clone()]);
    let a = st.simulate(&y0, |_| vec![], 0.5, 5).unwrap();
    let b = st.simulate(&y0, |_| vec![], 0.5, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.states.len(), 51);
    assert_eq!(a.snapshots().count(), 10);
    assert!((a.states[50].time - 0.5).abs() < 1e-15);
}

#[test]
fn oversized_step_is_rejected() {
    let model = cavity(32, 1.0);
    let st = model.stepper(0.05).unwrap();
    let err = st.step(&StaggeredState::rest(model.grid()), &[]).unwrap_err();
    assert!(matches!(err, Error::Stability { .. }));
    assert!(err.is_numerical());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_is_self_adjoint(x in prop::collection::vec(-1.0f64..1.0, 84), z in prop::collection::vec(-1.0f64..1.0, 84)) {
        let model = cavity(7, 1.0);
        let a = &model.operators().laplacian;
        let lhs: f64 = a.matvec(&x).iter().zip(&z).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(a.matvec(&z)).map(|(p, q)| p * q).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn projection_is_divergence_free_and_idempotent(z in prop::collection::vec(-1.0f64..1.0, 84)) {
        let model = cavity(7, 1.0);
        let p = model.project_divergence_free(&z);
        prop_assert!(norm_inf(&model.divergence(&p)) <= 1e-10);
        let pp = model.project_divergence_free(&p);
        prop_assert!(linf(&p, &pp) <= 1e-12);
    }

    #[test]
    fn advection_is_quadratic(y in prop::collection::vec(-1.0f64..1.0, 84), s in 0.1f64..3.0) {
        let grid = CavityGrid::new(7, 7).unwrap();
        let model = FlowModel::new(grid, Walls::at_rest(), 0.01, 0.7).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| s * v).collect();
        let a = model.advection(&y);
        let b = model.advection(&ys);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((s * s * p - q).abs() <= 1e-11 * (1.0 + q.abs()));
        }
    }
}
