use crate::error::{Error, Result};
use crate::flow::{FlowModel, StaggeredState};
use crate::linalg::BandedCholesky;
use crate::scalar::{all_finite, axpy, Real};

/// Incremental pressure-correction time stepper with a fixed step size.
///
/// One step: explicit advection and forcing with the lagged pressure
/// gradient, an implicit viscous solve `(I + dt ν A) y* = ...`, and a
/// pressure-Poisson projection making `y` discretely divergence-free. Steady
/// states of the semi-discrete system are exact fixed points.
#[derive(Clone, Debug)]
pub struct Stepper<'m, T> {
    model: &'m FlowModel<T>,
    dt: T,
    viscous: BandedCholesky<T>,
}

impl<'m, T: Real> Stepper<'m, T> {
    pub fn new(model: &'m FlowModel<T>, dt: T) -> Result<Self> {
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::param("dt", "time step must be positive and finite"));
        }
        let k = model.operators().laplacian.shifted(T::one(), dt * model.nu());
        Ok(Self {
            model,
            dt,
            viscous: BandedCholesky::factor(&k)?,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn model(&self) -> &'m FlowModel<T> {
        self.model
    }

    pub fn step(&self, state: &StaggeredState<T>, controls: &[T]) -> Result<StaggeredState<T>> {
        self.advance(state, controls, true)
    }

    /// Same as [`step`](Self::step) with the advection term switched off.
    pub fn stokes_step(&self, state: &StaggeredState<T>, controls: &[T]) -> Result<StaggeredState<T>> {
        self.advance(state, controls, false)
    }

    fn advance(&self, state: &StaggeredState<T>, controls: &[T], with_advection: bool) -> Result<StaggeredState<T>> {
        let model = self.model;
        let ops = model.operators();
        let dt = self.dt;
        let bound = model.stable_dt(&state.velocity);
        if with_advection && dt > bound {
            return Err(Error::Stability {
                dt: dt.to_f64_lossy(),
                bound: bound.to_f64_lossy(),
                time: state.time.to_f64_lossy(),
            });
        }
        model.check_controls(controls)?;
        if state.pressure.len() != model.grid().n_cells() {
            return Err(Error::dims(
                "pressure vector",
                model.grid().n_cells(),
                state.pressure.len(),
            ));
        }
        model.grid().check_velocity_len(state.velocity.len())?;

        let mut rhs = state.velocity.clone();
        let mut forcing = if with_advection {
            model.advection(&state.velocity)
        } else {
            vec![T::zero(); rhs.len()]
        };
        for (b, &u) in ops.control.iter().zip(controls) {
            axpy(u, b, &mut forcing);
        }
        axpy(model.nu(), &ops.boundary, &mut forcing);
        axpy(-T::one(), &ops.gradient.matvec(&state.pressure), &mut forcing);
        axpy(dt, &forcing, &mut rhs);

        self.viscous.solve_in_place(&mut rhs);
        let mut velocity = rhs;

        let mut phi = model.gradient_potential(&velocity);
        phi.iter_mut().for_each(|x| *x /= dt);
        axpy(-dt, &ops.gradient.matvec(&phi), &mut velocity);
        let mut pressure = state.pressure.clone();
        axpy(T::one(), &phi, &mut pressure);

        let time = state.time + dt;
        if !all_finite(&velocity) || !all_finite(&pressure) {
            return Err(Error::BlowUp {
                time: time.to_f64_lossy(),
            });
        }
        Ok(StaggeredState {
            velocity,
            pressure,
            time,
        })
    }

    /// Integrates from `y0` over `[y0.time, y0.time + horizon]` with the
    /// control signal evaluated at the start of each step. `observe` sees
    /// every state including the initial one, with its step index.
    pub fn simulate_observed<C, O>(
        &self,
        y0: &StaggeredState<T>,
        mut control: C,
        horizon: T,
        mut observe: O,
    ) -> Result<StaggeredState<T>>
    where
        C: FnMut(T) -> Vec<T>,
        O: FnMut(usize, &StaggeredState<T>) -> Result<()>,
    {
        let steps = step_count(horizon, self.dt)?;
        let t0 = y0.time;
        let mut state = y0.clone();
        observe(0, &state)?;
        for n in 0..steps {
            let u = control(state.time);
            let mut next = self.step(&state, &u)?;
            // t_n = t0 + n dt without accumulated round-off
            next.time = t0 + T::from_usize_lossy(n + 1) * self.dt;
            state = next;
            observe(n + 1, &state)?;
        }
        Ok(state)
    }

    /// Full trajectory on `t = 0, dt, ..., horizon`; every `stride`-th state
    /// is flagged as a snapshot.
    pub fn simulate<C>(&self, y0: &StaggeredState<T>, control: C, horizon: T, stride: usize) -> Result<Trajectory<T>>
    where
        C: FnMut(T) -> Vec<T>,
    {
        if stride == 0 {
            return Err(Error::param("snapshot_stride", "must be at least 1"));
        }
        let mut states = Vec::new();
        self.simulate_observed(y0, control, horizon, |_, s| {
            states.push(s.clone());
            Ok(())
        })?;
        Ok(Trajectory { states, stride })
    }
}

/// Number of uniform steps covering `horizon`; rejects horizons that are
/// not (close to) a multiple of `dt`.
pub(crate) fn step_count<T: Real>(horizon: T, dt: T) -> Result<usize> {
    if !(horizon >= T::zero()) {
        return Err(Error::param("horizon", "must be non-negative"));
    }
    let ratio = horizon / dt;
    let n = ratio.round();
    if (ratio - n).abs() > T::lit(1e-6) * n.max(T::one()) {
        return Err(Error::param("horizon", "must be an integer multiple of dt"));
    }
    n.to_usize()
        .ok_or_else(|| Error::param("horizon", "step count out of range"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<StaggeredState<T>>,
    pub stride: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn times(&self) -> Vec<T> {
        self.states.iter().map(|s| s.time).collect()
    }

    /// States flagged for export: indices `stride, 2 stride, ...`.
    pub fn snapshots(&self) -> impl Iterator<Item = &StaggeredState<T>> {
        self.states.iter().skip(self.stride).step_by(self.stride)
    }

    /// State whose time is within `tol` of `t`.
    pub fn at_time(&self, t: T, tol: T) -> Option<&StaggeredState<T>> {
        self.states.iter().find(|s| (s.time - t).abs() <= tol)
    }
}
