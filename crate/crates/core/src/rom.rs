//! Galerkin reduced-order model on the POD basis with DEIM-sampled
//! advection:
//!
//! `M ẇ = -ν A_r w + c + η_r(w) + B_r u`
//!
//! where `c = Ψᵀ ν (a - A ȳ)` collects the viscous and boundary terms of the
//! mean flow and `η_r(w)` approximates `Ψᵀ η(ȳ + Ψw)`.

use std::path::Path;

use crate::deim::{DeimOperator, DEIM_TAG};
use crate::error::{Error, Result};
use crate::flow::{advection_at, stencil, FlowModel, ShapeFunction, VelocityLookup, Walls};
use crate::grid::CavityGrid;
use crate::hjb::ControlSystem;
use crate::io::{TextReader, TextWriter};
use crate::linalg::{Lu, Matrix};
use crate::pod::PodBasis;
use crate::scalar::{dot, norm2, Real};

pub const ROM_TAG: &str = "HJBPOD-ROM";

/// Trajectories whose coefficient norm exceeds this are declared blown up.
pub const BLOW_UP_NORM: f64 = 1e6;

/// Cost and discount parameters of the reduced control problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostParams<T> {
    /// Control weight `α`.
    pub alpha: T,
    /// Discount rate `λ`.
    pub lambda: T,
    /// Factor turning `‖w‖²` into the squared L² distance to the mean flow;
    /// the cell area for a Euclidean-orthonormal basis.
    pub state_weight: T,
}

impl<T: Real> CostParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) {
            return Err(Error::param("lambda", "discount rate must be positive"));
        }
        if !(self.alpha >= T::zero()) {
            return Err(Error::param("alpha", "control weight must be non-negative"));
        }
        if !(self.state_weight > T::zero()) {
            return Err(Error::param("state_weight", "must be positive"));
        }
        Ok(())
    }
}

/// How the reduced advection term is evaluated.
#[derive(Clone, Debug)]
pub enum NonlinearityMode<T> {
    /// DEIM: advection sampled at the interpolation rows only.
    Deim(DeimOperator<T>),
    /// Full-grid evaluation of `Ψᵀ η(ȳ + Ψw)`; reference for testing.
    Exact,
}

/// Advection at the DEIM rows, evaluated from the local stencil values of
/// `ȳ + Ψw` only.
#[derive(Clone, Debug)]
struct SampledAdvection<T> {
    grid: CavityGrid,
    walls: Walls<T>,
    upwind: T,
    rows: Vec<usize>,
    /// Sorted union of the stencils of all rows.
    local: Vec<usize>,
    mean_local: Vec<T>,
    psi_local: Matrix<T>,
}

struct LocalField<'a, T> {
    local: &'a [usize],
    values: &'a [T],
}

impl<T: Real> VelocityLookup<T> for LocalField<'_, T> {
    fn velocity(&self, k: usize) -> T {
        let pos = self
            .local
            .binary_search(&k)
            .expect("stencil unknown outside the sampled set");
        self.values[pos]
    }
}

impl<T: Real> SampledAdvection<T> {
    fn new(model: &FlowModel<T>, basis: &PodBasis<T>, rows: &[usize]) -> Self {
        let grid = *model.grid();
        let mut local: Vec<usize> = rows.iter().flat_map(|&r| stencil(&grid, r)).collect();
        local.sort_unstable();
        local.dedup();
        Self {
            grid,
            walls: *model.walls(),
            upwind: model.upwind(),
            rows: rows.to_vec(),
            mean_local: local.iter().map(|&k| basis.mean()[k]).collect(),
            psi_local: basis.modes().select_rows(&local),
            local,
        }
    }

    fn samples(&self, w: &[T]) -> Vec<T> {
        let mut values = self.psi_local.matvec(w);
        for (v, &m) in values.iter_mut().zip(&self.mean_local) {
            *v += m;
        }
        let field = LocalField {
            local: &self.local,
            values: &values,
        };
        self.rows
            .iter()
            .map(|&r| advection_at(&self.grid, &self.walls, self.upwind, r, &field))
            .collect()
    }
}

#[derive(Clone, Debug)]
enum Nonlinearity<T> {
    Deim {
        op: DeimOperator<T>,
        sampler: SampledAdvection<T>,
    },
    Exact {
        model: Box<FlowModel<T>>,
        basis: Box<PodBasis<T>>,
    },
}

#[derive(Clone, Debug)]
pub struct RomSystem<T> {
    mass: Matrix<T>,
    mass_lu: Lu<T>,
    stiffness: Matrix<T>,
    control: Vec<T>,
    mean_term: Vec<T>,
    nu: T,
    cost: CostParams<T>,
    nonlinearity: Nonlinearity<T>,
}

impl<T: Real> RomSystem<T> {
    pub fn assemble(
        model: &FlowModel<T>,
        basis: &PodBasis<T>,
        shape: &ShapeFunction<T>,
        mode: NonlinearityMode<T>,
        cost: CostParams<T>,
    ) -> Result<Self> {
        cost.validate()?;
        if basis.grid() != model.grid() {
            return Err(Error::dims(
                "ROM grid",
                model.grid().n_velocity(),
                basis.grid().n_velocity(),
            ));
        }
        model.grid().check_velocity_len(shape.field.len())?;
        let psi = basis.modes();
        let ell = basis.dim();
        let ops = model.operators();

        let mass = psi.tr_matmul(psi);
        let a_psi: Vec<Vec<T>> = psi.columns().map(|c| ops.laplacian.matvec(c)).collect();
        let a_psi = Matrix::from_columns(psi.nrows(), &a_psi)?;
        let stiffness = psi.tr_matmul(&a_psi);
        let control = psi.tr_matvec(&shape.field);
        let mean_term = psi.tr_matvec(&ops.viscous(model.nu(), basis.mean()));

        let nonlinearity = match mode {
            NonlinearityMode::Deim(op) => {
                if op.reduced_dim() != ell {
                    return Err(Error::dims("DEIM projection rows", ell, op.reduced_dim()));
                }
                let sampler = SampledAdvection::new(model, basis, op.indices());
                Nonlinearity::Deim { op, sampler }
            }
            NonlinearityMode::Exact => Nonlinearity::Exact {
                model: Box::new(model.clone()),
                basis: Box::new(basis.clone()),
            },
        };
        Ok(Self {
            mass_lu: Lu::new(&mass)?,
            mass,
            stiffness,
            control,
            mean_term,
            nu: model.nu(),
            cost,
            nonlinearity,
        })
    }

    pub fn dim(&self) -> usize {
        self.control.len()
    }

    pub fn mass(&self) -> &Matrix<T> {
        &self.mass
    }

    pub fn stiffness(&self) -> &Matrix<T> {
        &self.stiffness
    }

    pub fn control_vector(&self) -> &[T] {
        &self.control
    }

    pub fn mean_term(&self) -> &[T] {
        &self.mean_term
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn cost(&self) -> &CostParams<T> {
        &self.cost
    }

    pub fn deim(&self) -> Option<&DeimOperator<T>> {
        match &self.nonlinearity {
            Nonlinearity::Deim { op, .. } => Some(op),
            Nonlinearity::Exact { .. } => None,
        }
    }

    /// Reduced advection `η_r(w)`.
    pub fn nonlinearity(&self, w: &[T]) -> Vec<T> {
        match &self.nonlinearity {
            Nonlinearity::Deim { op, sampler } => op.projection().matvec(&sampler.samples(w)),
            Nonlinearity::Exact { model, basis } => {
                let y = basis.reconstruct(w).expect("coefficient length checked");
                basis.modes().tr_matvec(&model.advection(&y))
            }
        }
    }

    fn rhs_into(&self, w: &[T], u: T, out: &mut [T]) {
        let nl = self.nonlinearity(w);
        let aw = self.stiffness.matvec(w);
        for i in 0..out.len() {
            out[i] = -self.nu * aw[i] + self.mean_term[i] + nl[i] + self.control[i] * u;
        }
        let solved = self.mass_lu.solve(out);
        out.copy_from_slice(&solved);
    }

    /// `ẇ` at `(w, u)`.
    pub fn rhs(&self, w: &[T], u: T) -> Result<Vec<T>> {
        if w.len() != self.dim() {
            return Err(Error::dims("ROM state", self.dim(), w.len()));
        }
        let mut out = vec![T::zero(); w.len()];
        self.rhs_into(w, u, &mut out);
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::BlowUp { time: f64::NAN });
        }
        Ok(out)
    }

    /// `L(w, u) = weight ‖w‖² + α u²`
    pub fn running_cost(&self, w: &[T], u: T) -> T {
        self.cost.state_weight * dot(w, w) + self.cost.alpha * u * u
    }

    fn rk4_step(&self, w: &[T], u: T, dt: T) -> Vec<T> {
        let n = w.len();
        let half = T::lit(0.5);
        let mut k1 = vec![T::zero(); n];
        let mut k2 = vec![T::zero(); n];
        let mut k3 = vec![T::zero(); n];
        let mut k4 = vec![T::zero(); n];
        let shifted = |k: &[T], s: T| -> Vec<T> { w.iter().zip(k).map(|(&a, &b)| a + s * b).collect() };
        self.rhs_into(w, u, &mut k1);
        self.rhs_into(&shifted(&k1, half * dt), u, &mut k2);
        self.rhs_into(&shifted(&k2, half * dt), u, &mut k3);
        self.rhs_into(&shifted(&k3, dt), u, &mut k4);
        let sixth = dt / T::lit(6.0);
        (0..n)
            .map(|i| w[i] + sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]))
            .collect()
    }

    /// Classical RK4 at uniform `dt` with the control sampled at the start
    /// of each step and held over it. `control` sees `(t, w(t))`.
    pub fn integrate<C>(&self, w0: &[T], mut control: C, horizon: T, dt: T) -> Result<RomTrajectory<T>>
    where
        C: FnMut(T, &[T]) -> T,
    {
        if !(dt > T::zero()) {
            return Err(Error::param("dt", "time step must be positive"));
        }
        if w0.len() != self.dim() {
            return Err(Error::dims("ROM initial state", self.dim(), w0.len()));
        }
        let steps = crate::flow::stepper::step_count(horizon, dt)?;
        let mut traj = RomTrajectory {
            times: vec![T::zero()],
            states: vec![w0.to_vec()],
            controls: Vec::with_capacity(steps),
        };
        let limit = T::lit(BLOW_UP_NORM);
        for n in 0..steps {
            let t = T::from_usize_lossy(n) * dt;
            let w = traj.states.last().expect("non-empty");
            let u = control(t, w);
            let next = self.rk4_step(w, u, dt);
            let t_next = T::from_usize_lossy(n + 1) * dt;
            let norm = norm2(&next);
            if !norm.is_finite() || norm > limit {
                return Err(Error::BlowUp {
                    time: t_next.to_f64_lossy(),
                });
            }
            traj.controls.push(u);
            traj.times.push(t_next);
            traj.states.push(next);
        }
        Ok(traj)
    }

    /// Discounted cost along an integrated trajectory (trapezoid rule) with a
    /// bound on the neglected tail beyond the horizon.
    pub fn reduced_cost(&self, traj: &RomTrajectory<T>) -> CostEstimate<T> {
        let lambda = self.cost.lambda;
        let n = traj.states.len();
        let values: Vec<T> = (0..n)
            .map(|k| {
                let u = traj
                    .controls
                    .get(k)
                    .or(traj.controls.last())
                    .copied()
                    .unwrap_or_else(T::zero);
                self.running_cost(&traj.states[k], u) * (-lambda * traj.times[k]).exp()
            })
            .collect();
        let mut value = T::zero();
        for k in 1..n {
            value += T::lit(0.5) * (traj.times[k] - traj.times[k - 1]) * (values[k] + values[k - 1]);
        }
        let l_max = (0..n)
            .map(|k| values[k] * (lambda * traj.times[k]).exp())
            .fold(T::zero(), T::max);
        let horizon = traj.times.last().copied().unwrap_or_else(T::zero);
        CostEstimate {
            value,
            tail_bound: l_max * (-lambda * horizon).exp() / lambda,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let Some(deim) = self.deim() else {
            return Err(Error::param("nonlinearity", "only DEIM reduced models are serialized"));
        };
        let ell = self.dim();
        let mut w = TextWriter::new(ROM_TAG, &[ell.to_string()]);
        let flat = |m: &Matrix<T>| -> Vec<T> { (0..ell).flat_map(|i| m.row(i)).collect() };
        let keyed = |w: &mut TextWriter, key: &str, v: &[T]| {
            let mut line = String::from(key);
            for x in v {
                line.push_str(&format!(" {x:e}"));
            }
            w.line(&line);
        };
        keyed(&mut w, "mass", &flat(&self.mass));
        keyed(&mut w, "stiffness", &flat(&self.stiffness));
        keyed(&mut w, "control", &self.control);
        keyed(&mut w, "mean", &self.mean_term);
        keyed(&mut w, "nu", &[self.nu]);
        keyed(&mut w, "alpha", &[self.cost.alpha]);
        keyed(&mut w, "lambda", &[self.cost.lambda]);
        keyed(&mut w, "state_weight", &[self.cost.state_weight]);
        deim.write(&mut w);
        w.save(path)
    }

    /// Restores a saved DEIM model. The advection stencils are rebuilt from
    /// `model` and `basis`, which must be the ones it was assembled from.
    pub fn load(path: &Path, model: &FlowModel<T>, basis: &PodBasis<T>) -> Result<Self> {
        let mut r = TextReader::open(path, ROM_TAG)?;
        let ell: usize = r.header_field(0, "l")?;
        if ell != basis.dim() {
            return Err(Error::dims("ROM dimension vs basis", basis.dim(), ell));
        }
        let square = |v: Vec<T>| -> Matrix<T> {
            let rows: Vec<Vec<T>> = v.chunks(ell).map(<[T]>::to_vec).collect();
            Matrix::from_rows(&rows)
        };
        let mass = square(r.keyed("mass", ell * ell)?);
        let stiffness = square(r.keyed("stiffness", ell * ell)?);
        let control = r.keyed("control", ell)?;
        let mean_term = r.keyed("mean", ell)?;
        let nu = r.keyed::<T>("nu", 1)?[0];
        let alpha = r.keyed::<T>("alpha", 1)?[0];
        let lambda = r.keyed::<T>("lambda", 1)?[0];
        let state_weight = r.keyed::<T>("state_weight", 1)?[0];
        let deim_header: Vec<String> = r.keyed(DEIM_TAG, 3)?;
        if deim_header[0] != crate::io::VERSION {
            return Err(r.format("embedded DEIM block version"));
        }
        let m: usize = deim_header[1].parse().map_err(|_| r.format("DEIM size"))?;
        let op = DeimOperator::read(&mut r, m, ell)?;
        r.finish()?;
        let sampler = SampledAdvection::new(model, basis, op.indices());
        let cost = CostParams {
            alpha,
            lambda,
            state_weight,
        };
        cost.validate()?;
        Ok(Self {
            mass_lu: Lu::new(&mass)?,
            mass,
            stiffness,
            control,
            mean_term,
            nu,
            cost,
            nonlinearity: Nonlinearity::Deim { op, sampler },
        })
    }
}

impl<T: Real> ControlSystem<T> for RomSystem<T> {
    fn state_dim(&self) -> usize {
        self.dim()
    }

    fn dynamics(&self, x: &[T], u: T, dx: &mut [T]) {
        self.rhs_into(x, u, dx);
    }

    fn running_cost(&self, x: &[T], u: T) -> T {
        RomSystem::running_cost(self, x, u)
    }
}

/// Reduced trajectory on a uniform time grid; `controls[k]` is held on
/// `[times[k], times[k+1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct RomTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub controls: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate<T> {
    /// Truncated discounted cost.
    pub value: T,
    /// `L_max e^{-λT} / λ`
    pub tail_bound: T,
}
