//! Feedback runs on the reduced and the full model, tracking errors against
//! the mean flow, and plot-ready exports.
//!
//! The controller only ever sees reduced coordinates `w = Ψᵀ(y - ȳ)`; the
//! control is sampled at the start of each step and held over it.

use std::fmt::Write as _;
use std::path::Path;

use tracing::info;

use crate::error::{Error, Result};
use crate::flow::{ShapeKind, StaggeredState, Stepper};
use crate::grid::CavityGrid;
use crate::pod::PodBasis;
use crate::rom::{RomSystem, RomTrajectory};
use crate::scalar::Real;

/// `max |field - reference|` over all velocity unknowns.
pub fn linf_error<T: Real>(field: &[T], reference: &[T]) -> Result<T> {
    if field.len() != reference.len() {
        return Err(Error::dims("L-infinity error", reference.len(), field.len()));
    }
    Ok(field
        .iter()
        .zip(reference)
        .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
}

/// Scalar series on a uniform time grid starting at `t = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSeries<T> {
    pub dt: T,
    pub values: Vec<T>,
}

impl<T: Real> ErrorSeries<T> {
    pub fn horizon(&self) -> T {
        T::from_usize_lossy(self.values.len().saturating_sub(1)) * self.dt
    }

    /// Value at the stored step nearest to `t`.
    pub fn sample(&self, t: T) -> Result<T> {
        if self.values.is_empty() {
            return Err(Error::Empty("error series"));
        }
        let horizon = self.horizon();
        if !(t >= T::zero()) || t > horizon + T::lit(1e-9) * horizon.max(T::one()) {
            return Err(Error::BeyondHorizon {
                time: t.to_f64_lossy(),
                horizon: horizon.to_f64_lossy(),
            });
        }
        let k = (t / self.dt).round().to_usize().unwrap_or(0);
        Ok(self.values[k.min(self.values.len() - 1)])
    }
}

/// One closed-loop or open-loop run of the full model.
#[derive(Clone, Debug, PartialEq)]
pub struct FullRun<T> {
    /// Tracking error at every step, including `t = 0`.
    pub errors: ErrorSeries<T>,
    /// `controls[k]` is held on `[k dt, (k+1) dt)`.
    pub controls: Vec<T>,
    /// States kept at the requested capture times.
    pub captured: Vec<StaggeredState<T>>,
    pub final_state: StaggeredState<T>,
}

/// Steps the full model under `feedback(w)` with `w` the projection of the
/// current state. Single-control models only.
pub fn run_closed_loop_full<T, F>(
    stepper: &Stepper<'_, T>,
    basis: &PodBasis<T>,
    y0: &StaggeredState<T>,
    mut feedback: F,
    horizon: T,
    capture: &[T],
) -> Result<FullRun<T>>
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    let model = stepper.model();
    if model.n_controls() != 1 {
        return Err(Error::dims("closed loop controls", 1, model.n_controls()));
    }
    if basis.grid() != model.grid() {
        return Err(Error::dims(
            "closed loop grid",
            model.grid().n_velocity(),
            basis.grid().n_velocity(),
        ));
    }
    let dt = stepper.dt();
    let capture_steps: Vec<usize> = capture
        .iter()
        .map(|&t| (t / dt).round().to_usize().unwrap_or(0))
        .collect();
    let mut errors = Vec::new();
    let mut controls = Vec::new();
    let mut captured = Vec::new();
    let steps = crate::flow::stepper::step_count(horizon, dt)?;
    let mut state = y0.clone();
    let t0 = y0.time;
    for n in 0..=steps {
        errors.push(linf_error(&state.velocity, basis.mean())?);
        if capture_steps.contains(&n) {
            captured.push(state.clone());
        }
        if n == steps {
            break;
        }
        let w = basis.project(&state.velocity)?;
        let u = feedback(&w);
        controls.push(u);
        let mut next = stepper.step(&state, &[u])?;
        next.time = t0 + T::from_usize_lossy(n + 1) * dt;
        state = next;
    }
    Ok(FullRun {
        errors: ErrorSeries { dt, values: errors },
        controls,
        captured,
        final_state: state,
    })
}

/// Reduced closed loop `u = feedback(w)`, sample-and-hold at `dt`.
pub fn run_closed_loop_rom<T, F>(
    rom: &RomSystem<T>,
    w0: &[T],
    mut feedback: F,
    horizon: T,
    dt: T,
) -> Result<RomTrajectory<T>>
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    rom.integrate(w0, |_, w| feedback(w), horizon, dt)
}

/// Errors `‖Ψw‖∞` of the reconstructed reduced trajectory.
pub fn rom_errors<T: Real>(basis: &PodBasis<T>, traj: &RomTrajectory<T>) -> Result<ErrorSeries<T>> {
    let dt = match traj.times.get(1) {
        Some(&t1) => t1 - traj.times[0],
        None => T::one(),
    };
    let values = traj
        .states
        .iter()
        .map(|w| {
            let y = basis.reconstruct(w)?;
            linf_error(&y, basis.mean())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorSeries { dt, values })
}

/// Error table at the report times for one shape function.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopReport<T> {
    pub shape_kind: ShapeKind,
    pub times: Vec<T>,
    pub err_controlled: Vec<T>,
    pub err_uncontrolled: Vec<T>,
    /// `(t, u)` pairs of the controlled run.
    pub control_trace: Vec<(T, T)>,
    /// Truncated discounted cost and its tail bound, when available.
    pub cost_estimate: Option<(T, T)>,
}

impl<T: Real> ClosedLoopReport<T> {
    pub fn build(
        shape_kind: ShapeKind,
        controlled: &ErrorSeries<T>,
        uncontrolled: &ErrorSeries<T>,
        controls: &[T],
        times: &[T],
    ) -> Result<Self> {
        if controlled.values.is_empty() || uncontrolled.values.is_empty() {
            return Err(Error::Empty("closed-loop runs"));
        }
        let err_controlled = times
            .iter()
            .map(|&t| controlled.sample(t))
            .collect::<Result<Vec<_>>>()?;
        let err_uncontrolled = times
            .iter()
            .map(|&t| uncontrolled.sample(t))
            .collect::<Result<Vec<_>>>()?;
        let control_trace = controls
            .iter()
            .enumerate()
            .map(|(k, &u)| (T::from_usize_lossy(k) * controlled.dt, u))
            .collect();
        for ((t, c), u) in times.iter().zip(&err_controlled).zip(&err_uncontrolled) {
            info!(
                shape = shape_kind.tag(),
                t = t.to_f64_lossy(),
                controlled = c.to_f64_lossy(),
                uncontrolled = u.to_f64_lossy(),
                "tracking error"
            );
        }
        Ok(Self {
            shape_kind,
            times: times.to_vec(),
            err_controlled,
            err_uncontrolled,
            control_trace,
            cost_estimate: None,
        })
    }

    /// Number of changes of the control value along the trace.
    pub fn switches(&self) -> usize {
        self.control_trace.windows(2).filter(|w| w[0].1 != w[1].1).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,err_controlled,err_uncontrolled,shape_kind\n");
        for ((t, c), u) in self.times.iter().zip(&self.err_controlled).zip(&self.err_uncontrolled) {
            writeln!(out, "{t:e},{c:e},{u:e},{}", self.shape_kind).expect("write to String");
        }
        out
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,u\n");
        for (t, u) in &self.control_trace {
            writeln!(out, "{t:e},{u:e}").expect("write to String");
        }
        out
    }

    /// Parses the output of [`to_csv`](Self::to_csv) and
    /// [`trace_csv`](Self::trace_csv).
    pub fn from_csv(report: &str, trace: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            path: "report.csv".into(),
            reason: reason.to_owned(),
        };
        let mut shape_kind = None;
        let mut times = Vec::new();
        let mut err_controlled = Vec::new();
        let mut err_uncontrolled = Vec::new();
        for line in report.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let num = |s: &str| s.trim().parse::<T>().map_err(|_| bad("bad number"));
            times.push(num(cols[0])?);
            err_controlled.push(num(cols[1])?);
            err_uncontrolled.push(num(cols[2])?);
            shape_kind = Some(cols[3].parse::<ShapeKind>().map_err(|e| bad(&e))?);
        }
        let mut control_trace = Vec::new();
        for line in trace.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let (t, u) = line.split_once(',').ok_or_else(|| bad("expected t,u"))?;
            let t = t.trim().parse::<T>().map_err(|_| bad("bad time"))?;
            let u = u.trim().parse::<T>().map_err(|_| bad("bad control"))?;
            control_trace.push((t, u));
        }
        Ok(Self {
            shape_kind: shape_kind.ok_or_else(|| bad("no rows"))?,
            times,
            err_controlled,
            err_uncontrolled,
            control_trace,
            cost_estimate: None,
        })
    }
}

/// Cell-centred velocity rows `x y u v` for quiver plots; wall faces carry
/// zero normal velocity.
pub fn quiver_rows<T: Real>(grid: &CavityGrid, velocity: &[T]) -> Result<String> {
    grid.check_velocity_len(velocity.len())?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let half = T::lit(0.5);
    let u_at = |i: usize, j: usize| {
        if i == 0 || i == nx {
            T::zero()
        } else {
            velocity[grid.u_index(i, j)]
        }
    };
    let v_at = |i: usize, j: usize| {
        if j == 0 || j == ny {
            T::zero()
        } else {
            velocity[grid.v_index(i, j)]
        }
    };
    let mut out = String::new();
    for j in 0..ny {
        for i in 0..nx {
            let x = (T::from_usize_lossy(i) + half) * grid.hx::<T>();
            let y = (T::from_usize_lossy(j) + half) * grid.hy::<T>();
            let u = half * (u_at(i, j) + u_at(i + 1, j));
            let v = half * (v_at(i, j) + v_at(i, j + 1));
            writeln!(out, "{x:e} {y:e} {u:e} {v:e}").expect("write to String");
        }
    }
    Ok(out)
}

pub fn save_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
