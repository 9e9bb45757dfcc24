mod common;

use common::spin_up;
use hjbpod::closed_loop::{linf_error, rom_errors, run_closed_loop_full, run_closed_loop_rom, ClosedLoopReport};
use hjbpod::deim::{nonlinearity_snapshots, DeimInterpolant};
use hjbpod::flow::{ShapeFunction, ShapeKind, StaggeredState};
use hjbpod::hjb::{OnlineFeedback, SolveOptions, ValueGrid};
use hjbpod::pod::PodBasis;
use hjbpod::rom::{CostParams, NonlinearityMode, RomSystem};

#[test]
fn zero_feedback_reproduces_the_open_loop_run() {
    let (model, set) = spin_up(10, 20, 2.0);
    let basis = PodBasis::compute(&set, 3).unwrap();
    let shape = ShapeFunction {
        kind: ShapeKind::NavierStokesSteady,
        field: set.snapshot(19),
    };
    let model = model.with_shapes(&[shape]).unwrap();
    let st = model.stepper(0.01).unwrap();
    let y0 = StaggeredState::rest(model.grid());
    let run = run_closed_loop_full(&st, &basis, &y0, |_| 0.0, 1.0, &[0.5]).unwrap();
    let open = st.simulate(&y0, |_| vec![0.0], 1.0, 1).unwrap();
    assert_eq!(run.final_state, *open.states.last().unwrap());
    assert_eq!(run.captured[0], open.states[50]);
    for (k, s) in open.states.iter().enumerate() {
        assert_eq!(run.errors.values[k], linf_error(&s.velocity, basis.mean()).unwrap());
    }
    assert!(run.controls.iter().all(|&u| u == 0.0));
}

#[test]
fn reduced_feedback_emits_admissible_controls() {
    let (model, set) = spin_up(10, 20, 2.0);
    let basis = PodBasis::compute(&set, 2).unwrap();
    let shape = ShapeFunction {
        kind: ShapeKind::NavierStokesSteady,
        field: set.snapshot(19),
    };
    let model = model.with_shapes(std::slice::from_ref(&shape)).unwrap();
    let fields: Vec<Vec<f64>> = (0..set.len()).map(|j| set.snapshot(j)).collect();
    let g = nonlinearity_snapshots(&model, fields.iter().map(Vec::as_slice)).unwrap();
    let op = DeimInterpolant::from_snapshots(&g, 4)
        .unwrap()
        .operator(basis.modes())
        .unwrap();
    let cost = CostParams {
        alpha: 0.01,
        lambda: 1.0,
        state_weight: 1.0,
    };
    let rom = RomSystem::assemble(&model, &basis, &shape, NonlinearityMode::Deim(op), cost).unwrap();
    let radii: Vec<f64> = (0..2)
        .map(|i| {
            1.5 * (0..set.len())
                .map(|j| basis.project(&set.snapshot(j)).unwrap()[i].abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let mut vg = ValueGrid::symmetric(&radii, 0.2, 0.04, 1.0).unwrap();
    let controls = [-1.0, 0.0, 1.0];
    assert!(vg.solve(&rom, &controls, &SolveOptions::default()).unwrap().converged);
    let fb = OnlineFeedback::new(&vg, &rom, &controls).unwrap();

    let y0 = StaggeredState::rest(model.grid());
    let w0 = basis.project(&y0.velocity).unwrap();
    let traj = run_closed_loop_rom(&rom, &w0, |w| fb.control(w), 2.0, 0.01).unwrap();
    assert!(traj.controls.iter().all(|u| controls.contains(u)));
    let rom_err = rom_errors(&basis, &traj).unwrap();

    let st = model.stepper(0.01).unwrap();
    let ctrl = run_closed_loop_full(&st, &basis, &y0, |w| fb.control(w), 2.0, &[]).unwrap();
    let free = run_closed_loop_full(&st, &basis, &y0, |_| 0.0, 2.0, &[]).unwrap();
    assert!(ctrl.controls.iter().all(|u| controls.contains(u)));
    let rep = ClosedLoopReport::build(
        ShapeKind::NavierStokesSteady,
        &ctrl.errors,
        &free.errors,
        &ctrl.controls,
        &[0.5, 2.0],
    )
    .unwrap();
    assert_eq!(rep.times, vec![0.5, 2.0]);
    assert_eq!(rep.control_trace.len(), 200);
    assert!(rom_err.sample(2.0).unwrap().is_finite());
    assert!(rep.err_controlled.iter().all(|e| e.is_finite()));
    assert!(ClosedLoopReport::build(
        ShapeKind::NavierStokesSteady,
        &ctrl.errors,
        &free.errors,
        &ctrl.controls,
        &[3.0]
    )
    .is_err());
}
